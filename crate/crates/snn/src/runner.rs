//! Parallel drivers over the core estimators.
//!
//! Work items (study repeats, imputation targets) are independent and each
//! seeds its own generator, so results are collected in input order and are
//! identical for any thread count.

use rayon::prelude::*;
use snn_core::baselines::{locf_predict, matching_predict, naive_predict, MatchingConfig};
use snn_core::eval::{run_dropout_repeat, run_synthetic_rct_repeat, Estimator, StudyConfig, StudyReport};
use snn_core::snn::SnnPrediction;
use snn_core::tensor::donor_set;
use snn_core::{predict, SnnConfig, TargetTuple, TrialDataset};

use crate::config::TargetSelection;
use crate::error::Result;

pub fn dropout_study(dataset: &TrialDataset, config: &StudyConfig) -> Result<StudyReport> {
    config.validate(dataset)?;
    let repeats = (0..config.n_repeats)
        .into_par_iter()
        .map(|r| run_dropout_repeat(dataset, config, r).map(|o| (r, o)))
        .collect::<snn_core::Result<Vec<_>>>()?;
    Ok(StudyReport::from_repeats(config, repeats))
}

pub fn synthetic_rct_study(dataset: &TrialDataset, config: &StudyConfig) -> Result<StudyReport> {
    config.validate(dataset)?;
    let repeats = (0..config.n_repeats)
        .into_par_iter()
        .map(|r| run_synthetic_rct_repeat(dataset, config, r).map(|o| (r, o)))
        .collect::<snn_core::Result<Vec<_>>>()?;
    Ok(StudyReport::from_repeats(config, repeats))
}

/// Unobserved entries to impute, ordered by patient, arm, visit.
pub fn select_targets(dataset: &TrialDataset, selection: TargetSelection) -> Vec<TargetTuple> {
    let own = matches!(selection, TargetSelection::Dropouts | TargetSelection::All);
    let other = matches!(selection, TargetSelection::Counterfactual | TargetSelection::All);
    let mut targets = Vec::new();
    for i in 0..dataset.n_patients() {
        let assigned = dataset.arm_of(i);
        for a in 0..dataset.n_arms() {
            let wanted = if assigned == Some(a) { own } else { other };
            if !wanted {
                continue;
            }
            for t in 0..dataset.n_visits() {
                if !dataset.is_observed(i, t, a) {
                    targets.push(TargetTuple::new(i, t, a));
                }
            }
        }
    }
    targets
}

#[derive(Debug, Clone)]
pub struct Imputation {
    pub target: TargetTuple,
    pub estimate: f64,
    /// Present for the SNN estimator.
    pub snn: Option<SnnPrediction>,
}

pub fn impute(
    dataset: &TrialDataset,
    targets: &[TargetTuple],
    estimator: Estimator,
    snn: &SnnConfig,
    matching: &MatchingConfig,
) -> Result<Vec<Imputation>> {
    snn.validate()?;
    let out = targets
        .par_iter()
        .map(|&target| {
            let TargetTuple { patient, visit, arm } = target;
            dataset.check_target(target)?;
            let donors = || -> Vec<usize> {
                donor_set(dataset, visit, arm)
                    .into_iter()
                    .filter(|&j| j != patient)
                    .collect()
            };
            let (estimate, snn) = match estimator {
                Estimator::Snn => {
                    let p = predict(dataset, target, snn)?;
                    (p.estimate, Some(p))
                }
                Estimator::Naive => (naive_predict(dataset, visit, arm, &donors())?, None),
                Estimator::Locf => (locf_predict(dataset, patient, arm, visit)?, None),
                Estimator::Matching => (matching_predict(dataset, target, &donors(), matching)?, None),
            };
            Ok(Imputation { target, estimate, snn })
        })
        .collect::<snn_core::Result<Vec<_>>>()?;
    Ok(out)
}
