use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use snn_core::baselines::{locf_predict, matching_predict, naive_predict, MatchingConfig};
use snn_core::dgp::{
    generate_trial, GeneratedTrial, GeneratorConfig, LatentFactorModel, MissingnessMechanism, NoiseLevel,
};
use snn_core::eval::{run_dropout_study, run_synthetic_rct_study, split_test_patients, Estimator, Study, StudyConfig};
use snn_core::linalg::Matrix;
use snn_core::spectra::RankMode;
use snn_core::tensor::donor_set;
use snn_core::{TargetTuple, TrialDataset};

fn generated(n: usize, noise: f64, seed: u64) -> GeneratedTrial {
    let cfg = GeneratorConfig {
        n_patients: n,
        outcome_noise: NoiseLevel::RelativeToSignal(noise),
        covariate_noise: Some(NoiseLevel::RelativeToSignal(noise)),
        ..GeneratorConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = LatentFactorModel::sample(&cfg, &mut rng).unwrap();
    generate_trial(&model, &mut rng).unwrap()
}

fn short_config(repeats: usize) -> StudyConfig {
    let mut cfg = StudyConfig {
        n_repeats: repeats,
        seed: 3,
        ..StudyConfig::default()
    };
    cfg.snn.rank_mode = RankMode::Fixed(2);
    cfg
}

#[test]
fn noiseless_studies_have_negligible_snn_error() {
    let g = generated(120, 0.0, 1);
    let cfg = short_config(2);
    let dropout = run_dropout_study(&g.dataset, &cfg).unwrap();
    let rct = run_synthetic_rct_study(&g.dataset, &cfg).unwrap();
    for report in [&dropout, &rct] {
        for row in report.rows.iter().filter(|r| r.estimator == Estimator::Snn) {
            assert!(row.nmse.unwrap() <= 1e-10, "{row:?}");
        }
    }
}

#[test]
fn grid_has_one_row_per_cell_and_estimator() {
    let g = generated(120, 0.1, 2);
    let cfg = short_config(3);
    let dropout = run_dropout_study(&g.dataset, &cfg).unwrap();
    assert_eq!(dropout.rows.len(), 3 * 3 * 3 * 4);
    for repeat in 0..3 {
        for mech in MissingnessMechanism::ALL {
            for arm in 0..3 {
                let mut e: Vec<Estimator> = dropout
                    .rows
                    .iter()
                    .filter(|r| r.repeat == repeat && r.mechanism == Some(mech) && r.arm == arm)
                    .map(|r| r.estimator)
                    .collect();
                e.sort();
                assert_eq!(e, Estimator::ALL.to_vec());
            }
        }
    }
    let rct = run_synthetic_rct_study(&g.dataset, &cfg).unwrap();
    assert_eq!(rct.rows.len(), 3 * 3 * 3);
    assert!(rct
        .rows
        .iter()
        .all(|r| r.estimator != Estimator::Locf && r.study == Study::SyntheticRct));
    assert_eq!(rct.seeds, vec![3, 4, 5]);
}

#[test]
fn dropout_counts_in_report_match_schedule() {
    let g = generated(150, 0.1, 3);
    let cfg = short_config(2);
    let report = run_dropout_study(&g.dataset, &cfg).unwrap();
    for row in &report.dropout_counts {
        let n_a = g.dataset.arm_members(row.arm).len();
        assert_eq!(row.count, cfg.schedule.quota(row.visit - 1, n_a));
    }
}

#[test]
fn reports_are_deterministic() {
    let g = generated(90, 0.1, 4);
    let cfg = short_config(2);
    assert_eq!(
        run_dropout_study(&g.dataset, &cfg).unwrap(),
        run_dropout_study(&g.dataset, &cfg).unwrap()
    );
    assert_eq!(
        run_synthetic_rct_study(&g.dataset, &cfg).unwrap(),
        run_synthetic_rct_study(&g.dataset, &cfg).unwrap()
    );
}

fn identical_patients(n: usize) -> TrialDataset {
    let traj = vec![3.0, 4.0, 6.0, 5.0, 7.0];
    TrialDataset::from_trajectories(
        (0..n).map(|i| format!("p{i}")).collect(),
        vec!["a".into(), "b".into()],
        vec!["baseline_adascog".into()],
        Matrix::from_row_major(n, 1, vec![2.0; n]),
        5,
        (0..n).map(|i| Some(i % 2)).collect(),
        vec![traj; n],
    )
    .unwrap()
}

#[test]
fn naive_is_exact_on_identical_patients() {
    let ds = identical_patients(60);
    let cfg = StudyConfig {
        n_repeats: 2,
        estimators: vec![Estimator::Naive, Estimator::Locf],
        ..StudyConfig::default()
    };
    let report = run_dropout_study(&ds, &cfg).unwrap();
    let naive: Vec<f64> = report
        .rows
        .iter()
        .filter(|r| r.estimator == Estimator::Naive)
        .filter_map(|r| r.nmse)
        .collect();
    assert!(!naive.is_empty());
    assert!(naive.iter().all(|&v| v == 0.0));
}

#[test]
fn test_split_rounds_half_down() {
    let ds = identical_patients(22);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let split = split_test_patients(&ds, &mut rng).unwrap();
    assert_eq!(split.iter().map(Vec::len).collect::<Vec<_>>(), vec![5, 5]);
    for (arm, test) in split.iter().enumerate() {
        assert!(test.iter().all(|&i| ds.arm_of(i) == Some(arm)));
    }
}

#[test]
fn baselines_stay_within_donor_range() {
    let g = generated(150, 0.2, 5);
    let ds = &g.dataset;
    let mut keep: Vec<usize> = (0..ds.n_patients()).map(|i| ds.observed_through(i)).collect();
    for (i, k) in keep.iter_mut().take(15).enumerate() {
        *k = 1 + i % 4;
    }
    let masked = ds.with_truncation(&keep).unwrap();
    for i in 0..15 {
        let a = masked.arm_of(i).unwrap();
        let donors = donor_set(&masked, 4, a);
        let ys: Vec<f64> = donors.iter().map(|&j| masked.outcome(j, 4, a).unwrap()).collect();
        let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let t = TargetTuple::new(i, 4, a);
        let naive = naive_predict(&masked, 4, a, &donors).unwrap();
        let matched = matching_predict(&masked, t, &donors, &MatchingConfig::default()).unwrap();
        for v in [naive, matched] {
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
        let everyone = MatchingConfig {
            n_neighbors: donors.len(),
            ..MatchingConfig::default()
        };
        let all = matching_predict(&masked, t, &donors, &everyone).unwrap();
        assert!((all - naive).abs() < 1e-12);

        let last = masked.observed_through(i);
        let carried: Vec<f64> = (last..5).map(|v| locf_predict(&masked, i, a, v).unwrap()).collect();
        assert!(carried.iter().all(|&v| v == masked.outcome(i, last - 1, a).unwrap()));
    }
}
