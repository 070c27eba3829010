use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use snn_core::dgp::{
    ewm, generate_trial, simulate_dropouts, DropoutRateSchedule, GeneratorConfig, LatentFactorModel,
    MissingnessMechanism, NoiseLevel,
};
use snn_core::spectra::svd;
use snn_core::tensor::donor_set;
use snn_core::TrialDataset;

fn trial(n: usize, seed: u64) -> TrialDataset {
    let cfg = GeneratorConfig {
        n_patients: n,
        ..GeneratorConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = LatentFactorModel::sample(&cfg, &mut rng).unwrap();
    generate_trial(&model, &mut rng).unwrap().dataset
}

#[test]
fn counts_follow_schedule_for_every_mechanism() {
    let schedule = DropoutRateSchedule::default();
    for (seed, n) in [(0, 1130), (1, 300), (2, 77)] {
        let ds = trial(n, seed);
        for mech in MissingnessMechanism::ALL {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let (masked, records) = simulate_dropouts(&ds, mech, &schedule, 2, &mut rng).unwrap();
            for arm in 0..ds.n_arms() {
                let n_a = ds.arm_members(arm).len();
                for visit in 1..ds.n_visits() {
                    let got = records
                        .iter()
                        .filter(|r| r.arm == arm && r.first_missing_visit == visit)
                        .count();
                    let want = (schedule.rates[visit - 1] * n_a as f64 + 0.5).floor() as usize;
                    assert_eq!(got, want, "{mech:?} arm {arm} visit {visit}");
                }
            }
            for r in &records {
                assert_eq!(masked.observed_through(r.patient), r.first_missing_visit);
                assert!(masked.dropped(r.patient, r.first_missing_visit));
            }
            // absorbing dropout and a nonincreasing donor pool
            for arm in 0..ds.n_arms() {
                let sizes: Vec<usize> = (0..ds.n_visits()).map(|t| donor_set(&masked, t, arm).len()).collect();
                assert!(sizes.windows(2).all(|w| w[0] >= w[1]), "{sizes:?}");
            }
            for i in 0..masked.n_patients() {
                let a = masked.arm_of(i).unwrap();
                let seen: Vec<bool> = (0..masked.n_visits()).map(|t| masked.is_observed(i, t, a)).collect();
                assert!(seen.windows(2).all(|w| w[0] || !w[1]));
            }
        }
    }
}

#[test]
fn mcar_ignores_outcome_values() {
    let ds = trial(150, 3);
    let schedule = DropoutRateSchedule::default();
    let n = ds.n_patients();
    let permuted = ds.map_outcomes(|i, t, _, _| ds.trajectory(n - 1 - i)[t]).unwrap();
    assert_ne!(permuted, ds);
    for seed in 0..20 {
        let run = |d: &TrialDataset| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            simulate_dropouts(d, MissingnessMechanism::Mcar, &schedule, 2, &mut rng)
                .unwrap()
                .1
        };
        assert_eq!(run(&ds), run(&permuted));
    }
}

#[test]
fn simulation_is_deterministic() {
    let ds = trial(120, 4);
    let schedule = DropoutRateSchedule::default();
    for mech in MissingnessMechanism::ALL {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            simulate_dropouts(&ds, mech, &schedule, 2, &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }
}

#[test]
fn generator_is_deterministic_and_low_rank() {
    let cfg = GeneratorConfig {
        n_patients: 60,
        outcome_noise: NoiseLevel::Absolute(0.0),
        covariate_noise: Some(NoiseLevel::Absolute(0.0)),
        ..GeneratorConfig::default()
    };
    let make = || {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m = LatentFactorModel::sample(&cfg, &mut rng).unwrap();
        generate_trial(&m, &mut rng).unwrap()
    };
    let (a, b) = (make(), make());
    assert_eq!(a.dataset, b.dataset);
    for arm in 0..3 {
        let s = svd(&a.ground_truth.arm_matrix(arm)).unwrap().singular_values;
        assert!(s[2] <= 1e-10 * s[0], "{s:?}");
    }
    for arm in 0..3 {
        assert_eq!(a.dataset.arm_members(arm).len(), 20);
    }
}

#[test]
fn ewm_reference_values() {
    assert!((ewm(&[1.0, 2.0, 3.0], 3).unwrap() - 4.25 / 1.75).abs() < 1e-12);
    assert_eq!(ewm(&[1.0, 2.0, 3.0], 1).unwrap(), 3.0);
    assert_eq!(ewm(&[4.0, 4.0, 4.0, 4.0], 3).unwrap(), 4.0);
}

proptest! {
    #[test]
    fn ewm_is_translation_and_scale_equivariant(
        xs in proptest::collection::vec(-100.0f64..100.0, 1..12),
        span in 1usize..10,
        c in -50.0f64..50.0,
    ) {
        let base = ewm(&xs, span).unwrap();
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
        prop_assert!((ewm(&shifted, span).unwrap() - (base + c)).abs() < 1e-9);
        prop_assert!((ewm(&scaled, span).unwrap() - base * c).abs() < 1e-9);
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(base >= lo - 1e-12 && base <= hi + 1e-12);
    }
}
