use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use snn_core::dgp::{generate_trial, GeneratedTrial, GeneratorConfig, LatentFactorModel, NoiseLevel};
use snn_core::snn::predict_with_donors;
use snn_core::spectra::RankMode;
use snn_core::tensor::{donor_set, feature_vector};
use snn_core::{predict, SnnConfig, TargetTuple, TrialDataset};

fn noiseless(n: usize, seed: u64) -> GeneratedTrial {
    let cfg = GeneratorConfig {
        n_patients: n,
        outcome_noise: NoiseLevel::Absolute(0.0),
        covariate_noise: Some(NoiseLevel::Absolute(0.0)),
        ..GeneratorConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = LatentFactorModel::sample(&cfg, &mut rng).unwrap();
    generate_trial(&model, &mut rng).unwrap()
}

/// Hides the last `hidden` visits of the first `k` patients of each arm.
fn withhold(ds: &TrialDataset, k: usize, hidden: usize) -> (TrialDataset, Vec<usize>) {
    let mut keep: Vec<usize> = (0..ds.n_patients()).map(|i| ds.observed_through(i)).collect();
    let mut targets = Vec::new();
    for a in 0..ds.n_arms() {
        for &i in ds.arm_members(a).iter().take(k) {
            keep[i] = ds.n_visits() - hidden;
            targets.push(i);
        }
    }
    (ds.with_truncation(&keep).unwrap(), targets)
}

fn fixed2() -> SnnConfig {
    SnnConfig {
        rank_mode: RankMode::Fixed(2),
        ..SnnConfig::default()
    }
}

#[test]
fn noiseless_targets_are_recovered() {
    for seed in 0..3 {
        let g = noiseless(150, seed);
        for hidden in [1, 3, 5] {
            let (masked, targets) = withhold(&g.dataset, 6, hidden);
            for &i in &targets {
                let a = masked.arm_of(i).unwrap();
                let t = TargetTuple::new(i, 4, a);
                let p = predict(&masked, t, &fixed2()).unwrap();
                let truth = g.ground_truth.get(i, 4, a);
                assert!(
                    (p.estimate - truth).abs() < 1e-6,
                    "hidden {hidden}: {} vs {truth}",
                    p.estimate
                );
                assert!(p.passed);
            }
        }
    }
}

#[test]
fn counterfactual_arm_is_recovered_from_covariates() {
    let g = noiseless(150, 9);
    let ds = &g.dataset;
    for i in 0..10 {
        let own = ds.arm_of(i).unwrap();
        let other = (own + 1) % ds.n_arms();
        let p = predict(ds, TargetTuple::new(i, 2, other), &fixed2()).unwrap();
        assert!((p.estimate - g.ground_truth.get(i, 2, other)).abs() < 1e-6);
    }
}

#[test]
fn universal_rank_recovers_with_outcome_history() {
    let g = noiseless(150, 4);
    let (masked, targets) = withhold(&g.dataset, 5, 1);
    for &i in &targets {
        let a = masked.arm_of(i).unwrap();
        let p = predict(&masked, TargetTuple::new(i, 4, a), &SnnConfig::default()).unwrap();
        assert!((p.estimate - g.ground_truth.get(i, 4, a)).abs() < 1e-6);
    }
}

#[test]
fn extra_visits_keep_identification() {
    let g = noiseless(150, 5);
    let (masked, targets) = withhold(&g.dataset, 4, 1);
    for &i in &targets {
        let a = masked.arm_of(i).unwrap();
        let t = TargetTuple::new(i, 4, a);
        let donors: Vec<usize> = donor_set(&masked, 4, a).into_iter().filter(|&j| j != i).collect();
        for visits in [vec![], vec![0], vec![0, 2], vec![0, 1, 2, 3]] {
            let fv = feature_vector(&masked, i, &visits, a).unwrap();
            let p = predict_with_donors(&masked, t, &donors, &fv, &fixed2()).unwrap();
            assert!(
                (p.estimate - g.ground_truth.get(i, 4, a)).abs() < 1e-6,
                "visits {visits:?}"
            );
        }
    }
}

#[test]
fn predictions_are_deterministic() {
    let g = noiseless(90, 1);
    let cfg = SnnConfig {
        seed: 42,
        ..SnnConfig::default()
    };
    let t = TargetTuple::new(3, 4, 1);
    let a = predict(&g.dataset, t, &cfg).unwrap();
    let b = predict(&g.dataset, t, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
}

#[test]
fn alpha_zero_fails_every_tuple() {
    let g = noiseless(90, 2);
    let cfg = SnnConfig {
        alpha: 0.0,
        ..SnnConfig::default()
    };
    for i in 0..20 {
        let a = g.dataset.arm_of(i).unwrap();
        let p = predict(&g.dataset, TargetTuple::new(i, 4, a), &cfg).unwrap();
        assert!(!p.passed);
        assert!(p.retained.is_empty());
    }
}

#[test]
fn target_never_donates_to_itself() {
    let g = noiseless(60, 3);
    let a = g.dataset.arm_of(0).unwrap();
    let p = predict(&g.dataset, TargetTuple::new(0, 4, a), &SnnConfig::default()).unwrap();
    assert!(p.per_model.iter().all(|m| !m.donor_indices.contains(&0)));
    let total: usize = p.per_model.iter().map(|m| m.donor_indices.len()).sum();
    assert_eq!(total, g.dataset.arm_members(a).len() - 1);
}
