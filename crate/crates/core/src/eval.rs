//! NMSE and the two case studies: imputing simulated dropouts, and
//! synthetic RCTs built on pretreatment covariates only.
//!
//! Every repeat is a pure function of `(dataset, config, repeat)`, so
//! callers may run repeats in any order or in parallel and assemble them
//! with [`StudyReport::from_repeats`].

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{locf_predict, matching_predict, naive_predict, MatchingConfig};
use crate::dgp::{simulate_dropouts, DropoutRateSchedule, MissingnessMechanism, DEFAULT_BASELINE_LABEL};
use crate::error::{Error, Result};
use crate::snn::{predict, SnnConfig, SnnPrediction};
use crate::tensor::{donor_set, TargetTuple, TrialDataset};

/// Σ(truth − prediction)² / Σ truth².
pub fn nmse(truth: &[f64], predictions: &[f64]) -> Result<f64> {
    if truth.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: predictions.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput { what: "nmse inputs" });
    }
    let (sse, ss) = sums(truth, predictions);
    if ss == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(sse / ss)
}

fn sums(truth: &[f64], predictions: &[f64]) -> (f64, f64) {
    truth
        .iter()
        .zip(predictions)
        .fold((0.0, 0.0), |(e, s), (y, p)| (e + (y - p) * (y - p), s + y * y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Estimator {
    Snn,
    Naive,
    Locf,
    Matching,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [Self::Snn, Self::Naive, Self::Locf, Self::Matching];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Snn => "snn",
            Self::Naive => "naive",
            Self::Locf => "locf",
            Self::Matching => "matching",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "snn" => Some(Self::Snn),
            "naive" => Some(Self::Naive),
            "locf" => Some(Self::Locf),
            "matching" => Some(Self::Matching),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Study {
    Dropout,
    SyntheticRct,
}

impl Study {
    pub fn as_str(self) -> &'static str {
        match self {
            Study::Dropout => "dropout",
            Study::SyntheticRct => "synthetic-rct",
        }
    }
}

/// Which visits of a withdrawn patient are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum EvalVisits {
    /// Only `eval_visit`.
    #[default]
    Final,
    /// Every unobserved visit from withdrawal through `eval_visit`.
    AllPostWithdrawal,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct StudyConfig {
    pub n_repeats: usize,
    pub mechanisms: Vec<MissingnessMechanism>,
    pub estimators: Vec<Estimator>,
    pub snn: SnnConfig,
    pub matching: MatchingConfig,
    pub schedule: DropoutRateSchedule,
    /// 1-based; `None` is the last visit.
    pub eval_visit: Option<usize>,
    pub eval_visits: EvalVisits,
    /// Covariate holding the pre-trial outcome used by MAR/MNAR.
    pub baseline_covariate: String,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            n_repeats: 10,
            mechanisms: MissingnessMechanism::ALL.to_vec(),
            estimators: Estimator::ALL.to_vec(),
            snn: SnnConfig::default(),
            matching: MatchingConfig::default(),
            schedule: DropoutRateSchedule::default(),
            eval_visit: None,
            eval_visits: EvalVisits::Final,
            baseline_covariate: String::from(DEFAULT_BASELINE_LABEL),
            seed: 0,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self, dataset: &TrialDataset) -> Result<()> {
        if self.n_repeats == 0 {
            return Err(Error::InvalidConfig("n_repeats must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidConfig("no estimators enabled".into()));
        }
        self.snn.validate()?;
        if self.matching.n_neighbors == 0 {
            return Err(Error::InvalidConfig("matching n_neighbors must be at least 1".into()));
        }
        self.eval_visit_index(dataset)?;
        Ok(())
    }

    /// 0-based evaluation visit.
    pub fn eval_visit_index(&self, dataset: &TrialDataset) -> Result<usize> {
        let t = self.eval_visit.unwrap_or(dataset.n_visits());
        if t == 0 || t > dataset.n_visits() {
            return Err(Error::InvalidConfig(alloc::format!(
                "eval_visit {t} outside 1..={}",
                dataset.n_visits()
            )));
        }
        Ok(t - 1)
    }

    pub fn repeat_seed(&self, repeat: usize) -> u64 {
        self.seed.wrapping_add(repeat as u64)
    }

    fn baseline_column(&self, dataset: &TrialDataset) -> Result<usize> {
        dataset
            .covariate_labels()
            .iter()
            .position(|l| *l == self.baseline_covariate)
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("no covariate named {}", self.baseline_covariate)))
    }

    fn enabled(&self, study: Study) -> Vec<Estimator> {
        let mut e: Vec<Estimator> = self
            .estimators
            .iter()
            .copied()
            .filter(|&e| !(study == Study::SyntheticRct && e == Estimator::Locf))
            .collect();
        e.sort();
        e.dedup();
        e
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NmseRow {
    pub study: Study,
    pub repeat: usize,
    /// `None` in the synthetic-RCT study.
    pub mechanism: Option<MissingnessMechanism>,
    pub arm: usize,
    pub estimator: Estimator,
    /// `None` when the arm had no targets in this repeat.
    pub nmse: Option<f64>,
    pub n_targets: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiagnosticsRow {
    pub study: Study,
    pub repeat: usize,
    pub mechanism: Option<MissingnessMechanism>,
    pub arm: usize,
    pub passed_nmse: Option<f64>,
    pub failed_nmse: Option<f64>,
    pub n_passed: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DropoutCountRow {
    pub repeat: usize,
    pub mechanism: MissingnessMechanism,
    pub arm: usize,
    /// 1-based visit of withdrawal.
    pub visit: usize,
    pub count: usize,
}

/// One scored prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct TupleResult {
    pub estimator: Estimator,
    pub target: TargetTuple,
    pub truth: f64,
    pub estimate: f64,
    pub passed: Option<bool>,
}

/// Rows produced by one repeat of one study.
#[derive(Debug, Clone, Default)]
pub struct RepeatOutcome {
    pub nmse_rows: Vec<NmseRow>,
    pub diagnostics: Vec<DiagnosticsRow>,
    pub dropout_counts: Vec<DropoutCountRow>,
    pub tuples: Vec<TupleResult>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StudyReport {
    pub config: StudyConfig,
    pub seeds: Vec<u64>,
    pub rows: Vec<NmseRow>,
    pub diagnostics_split: Vec<DiagnosticsRow>,
    pub dropout_counts: Vec<DropoutCountRow>,
}

/// NMSE over the passed and failed subsets separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsSplit {
    pub passed_nmse: Option<f64>,
    pub failed_nmse: Option<f64>,
    pub n_passed: usize,
    pub n_failed: usize,
    pub passed_sse: f64,
    pub failed_sse: f64,
}

pub fn split_by_diagnostics(predictions: &[SnnPrediction], truth: &[f64]) -> Result<DiagnosticsSplit> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: truth.len(),
        });
    }
    let flags: Vec<(bool, f64, f64)> = predictions
        .iter()
        .zip(truth)
        .map(|(p, &y)| (p.passed, y, p.estimate))
        .collect();
    Ok(split_flags(&flags))
}

fn split_flags(flags: &[(bool, f64, f64)]) -> DiagnosticsSplit {
    let subset = |want: bool| {
        let (y, p): (Vec<f64>, Vec<f64>) = flags.iter().filter(|f| f.0 == want).map(|f| (f.1, f.2)).unzip();
        let (sse, ss) = sums(&y, &p);
        let value = if y.is_empty() || ss == 0.0 {
            None
        } else {
            Some(sse / ss)
        };
        (value, y.len(), sse)
    };
    let (passed_nmse, n_passed, passed_sse) = subset(true);
    let (failed_nmse, n_failed, failed_sse) = subset(false);
    DiagnosticsSplit {
        passed_nmse,
        failed_nmse,
        n_passed,
        n_failed,
        passed_sse,
        failed_sse,
    }
}

struct Scored {
    estimator: Estimator,
    target: TargetTuple,
    truth: f64,
    estimate: f64,
    passed: Option<bool>,
}

fn predict_all(
    masked: &TrialDataset,
    truth_source: &TrialDataset,
    targets: &[TargetTuple],
    estimators: &[Estimator],
    config: &StudyConfig,
    snn: &SnnConfig,
) -> Result<Vec<Scored>> {
    let mut out = Vec::with_capacity(targets.len() * estimators.len());
    for &target in targets {
        let TargetTuple { patient, visit, arm } = target;
        let truth = truth_source
            .outcome(patient, visit, arm)
            .ok_or(Error::VisitNotObserved { patient, visit, arm })?;
        let donors = donor_set(masked, visit, arm);
        for &estimator in estimators {
            let (estimate, passed) = match estimator {
                Estimator::Snn => {
                    let p = predict(masked, target, snn)?;
                    (p.estimate, Some(p.passed))
                }
                Estimator::Naive => (naive_predict(masked, visit, arm, &donors)?, None),
                Estimator::Locf => (locf_predict(masked, patient, arm, visit)?, None),
                Estimator::Matching => (matching_predict(masked, target, &donors, &config.matching)?, None),
            };
            out.push(Scored {
                estimator,
                target,
                truth,
                estimate,
                passed,
            });
        }
    }
    Ok(out)
}

fn tabulate(
    outcome: &mut RepeatOutcome,
    study: Study,
    repeat: usize,
    mechanism: Option<MissingnessMechanism>,
    n_arms: usize,
    estimators: &[Estimator],
    scored: Vec<Scored>,
) {
    for arm in 0..n_arms {
        for &estimator in estimators {
            let (y, p): (Vec<f64>, Vec<f64>) = scored
                .iter()
                .filter(|s| s.target.arm == arm && s.estimator == estimator)
                .map(|s| (s.truth, s.estimate))
                .unzip();
            outcome.nmse_rows.push(NmseRow {
                study,
                repeat,
                mechanism,
                arm,
                estimator,
                nmse: nmse(&y, &p).ok(),
                n_targets: y.len(),
            });
        }
        if estimators.contains(&Estimator::Snn) {
            let flags: Vec<(bool, f64, f64)> = scored
                .iter()
                .filter(|s| s.target.arm == arm && s.estimator == Estimator::Snn)
                .map(|s| (s.passed.unwrap_or(false), s.truth, s.estimate))
                .collect();
            let split = split_flags(&flags);
            outcome.diagnostics.push(DiagnosticsRow {
                study,
                repeat,
                mechanism,
                arm,
                passed_nmse: split.passed_nmse,
                failed_nmse: split.failed_nmse,
                n_passed: split.n_passed,
                n_failed: split.n_failed,
            });
        }
    }
    outcome.tuples.extend(scored.into_iter().map(|s| TupleResult {
        estimator: s.estimator,
        target: s.target,
        truth: s.truth,
        estimate: s.estimate,
        passed: s.passed,
    }));
}

fn ensure_complete(dataset: &TrialDataset) -> Result<()> {
    if (0..dataset.n_patients()).any(|i| dataset.arm_of(i).is_some() && !dataset.is_complier(i)) {
        return Err(Error::PreexistingDropouts);
    }
    Ok(())
}

/// One repeat of the dropout study across all configured mechanisms.
pub fn run_dropout_repeat(complete: &TrialDataset, config: &StudyConfig, repeat: usize) -> Result<RepeatOutcome> {
    ensure_complete(complete)?;
    config.validate(complete)?;
    let baseline = config.baseline_column(complete)?;
    let eval_visit = config.eval_visit_index(complete)?;
    let estimators = config.enabled(Study::Dropout);
    let seed = config.repeat_seed(repeat);
    let snn = SnnConfig {
        seed,
        ..config.snn.clone()
    };
    let mut outcome = RepeatOutcome::default();
    for (mi, &mechanism) in config.mechanisms.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(mi as u64 + 1);
        let (masked, records) = simulate_dropouts(complete, mechanism, &config.schedule, baseline, &mut rng)?;
        for arm in 0..complete.n_arms() {
            for visit in 1..complete.n_visits() {
                let count = records
                    .iter()
                    .filter(|r| r.arm == arm && r.first_missing_visit == visit)
                    .count();
                outcome.dropout_counts.push(DropoutCountRow {
                    repeat,
                    mechanism,
                    arm,
                    visit: visit + 1,
                    count,
                });
            }
        }
        let mut targets = Vec::new();
        for r in records.iter().filter(|r| r.first_missing_visit <= eval_visit) {
            match config.eval_visits {
                EvalVisits::Final => targets.push(TargetTuple::new(r.patient, eval_visit, r.arm)),
                EvalVisits::AllPostWithdrawal => {
                    targets.extend((r.first_missing_visit..=eval_visit).map(|t| TargetTuple::new(r.patient, t, r.arm)))
                }
            }
        }
        let scored = predict_all(&masked, complete, &targets, &estimators, config, &snn)?;
        tabulate(
            &mut outcome,
            Study::Dropout,
            repeat,
            Some(mechanism),
            complete.n_arms(),
            &estimators,
            scored,
        );
    }
    Ok(outcome)
}

/// Per-arm half split: `⌊N_a / 2⌋` test patients, chosen at random.
pub fn split_test_patients(dataset: &TrialDataset, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<usize>>> {
    (0..dataset.n_arms())
        .map(|arm| {
            let mut members = dataset.arm_members(arm);
            if members.len() < 2 {
                return Err(Error::ArmTooSmall {
                    arm,
                    size: members.len(),
                    needed: 2,
                });
            }
            members.shuffle(rng);
            let mut test = members[..members.len() / 2].to_vec();
            test.sort_unstable();
            Ok(test)
        })
        .collect()
}

/// One repeat of the synthetic-RCT study.
pub fn run_synthetic_rct_repeat(complete: &TrialDataset, config: &StudyConfig, repeat: usize) -> Result<RepeatOutcome> {
    ensure_complete(complete)?;
    config.validate(complete)?;
    let eval_visit = config.eval_visit_index(complete)?;
    let estimators = config.enabled(Study::SyntheticRct);
    let seed = config.repeat_seed(repeat);
    let snn = SnnConfig {
        seed,
        ..config.snn.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let test_sets = split_test_patients(complete, &mut rng)?;
    let mut keep: Vec<usize> = (0..complete.n_patients())
        .map(|i| complete.observed_through(i))
        .collect();
    for &i in test_sets.iter().flatten() {
        keep[i] = 0;
    }
    let masked = complete.with_truncation(&keep)?;
    let targets: Vec<TargetTuple> = test_sets
        .iter()
        .enumerate()
        .flat_map(|(arm, test)| test.iter().map(move |&i| TargetTuple::new(i, eval_visit, arm)))
        .collect();
    let scored = predict_all(&masked, complete, &targets, &estimators, config, &snn)?;
    let mut outcome = RepeatOutcome::default();
    tabulate(
        &mut outcome,
        Study::SyntheticRct,
        repeat,
        None,
        complete.n_arms(),
        &estimators,
        scored,
    );
    Ok(outcome)
}

impl StudyReport {
    /// Assembles repeats (given in any order) into repeat order.
    pub fn from_repeats(config: &StudyConfig, mut repeats: Vec<(usize, RepeatOutcome)>) -> StudyReport {
        repeats.sort_by_key(|(r, _)| *r);
        let mut report = StudyReport {
            config: config.clone(),
            seeds: repeats.iter().map(|(r, _)| config.repeat_seed(*r)).collect(),
            rows: Vec::new(),
            diagnostics_split: Vec::new(),
            dropout_counts: Vec::new(),
        };
        for (_, o) in repeats {
            report.rows.extend(o.nmse_rows);
            report.diagnostics_split.extend(o.diagnostics);
            report.dropout_counts.extend(o.dropout_counts);
        }
        report
    }

    /// Merges another study's report (same config) into this one.
    pub fn merge(&mut self, other: StudyReport) {
        self.rows.extend(other.rows);
        self.diagnostics_split.extend(other.diagnostics_split);
        self.dropout_counts.extend(other.dropout_counts);
    }

    /// Mean NMSE over the present cells matching the filter.
    pub fn mean_nmse(
        &self,
        study: Study,
        mechanism: Option<MissingnessMechanism>,
        estimator: Estimator,
    ) -> Option<f64> {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.study == study && r.estimator == estimator)
            .filter(|r| mechanism.is_none() || r.mechanism == mechanism)
            .filter_map(|r| r.nmse)
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }

    /// `1 − mean NMSE(SNN) / mean NMSE(best baseline)` over all cells of a
    /// study (optionally one mechanism), with the best baseline's name.
    pub fn relative_improvement(
        &self,
        study: Study,
        mechanism: Option<MissingnessMechanism>,
    ) -> Option<(Estimator, f64)> {
        let snn = self.mean_nmse(study, mechanism, Estimator::Snn)?;
        let best = [Estimator::Naive, Estimator::Locf, Estimator::Matching]
            .into_iter()
            .filter_map(|e| self.mean_nmse(study, mechanism, e).map(|v| (e, v)))
            .min_by(|a, b| a.1.total_cmp(&b.1))?;
        if best.1 == 0.0 {
            return None;
        }
        Some((best.0, 1.0 - snn / best.1))
    }

    /// Means of passed/failed NMSE over cells where both subsets are present.
    pub fn diagnostics_means(
        &self,
        study: Study,
        mechanism: Option<MissingnessMechanism>,
    ) -> Option<(f64, f64, usize)> {
        let both: Vec<(f64, f64)> = self
            .diagnostics_split
            .iter()
            .filter(|r| r.study == study && (mechanism.is_none() || r.mechanism == mechanism))
            .filter_map(|r| Some((r.passed_nmse?, r.failed_nmse?)))
            .collect();
        if both.is_empty() {
            return None;
        }
        let n = both.len() as f64;
        Some((
            both.iter().map(|b| b.0).sum::<f64>() / n,
            both.iter().map(|b| b.1).sum::<f64>() / n,
            both.len(),
        ))
    }
}

/// Dropout study over all repeats, sequentially.
pub fn run_dropout_study(complete: &TrialDataset, config: &StudyConfig) -> Result<StudyReport> {
    let repeats = (0..config.n_repeats)
        .map(|r| run_dropout_repeat(complete, config, r).map(|o| (r, o)))
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyReport::from_repeats(config, repeats))
}

/// Synthetic-RCT study over all repeats, sequentially.
pub fn run_synthetic_rct_study(complete: &TrialDataset, config: &StudyConfig) -> Result<StudyReport> {
    let repeats = (0..config.n_repeats)
        .map(|r| run_synthetic_rct_repeat(complete, config, r).map(|o| (r, o)))
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyReport::from_repeats(config, repeats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nmse_examples() {
        assert_eq!(nmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(nmse(&[2.0, 2.0], &[1.0, 3.0]).unwrap(), 0.25);
        let a = nmse(&[1.5, -2.0, 3.0], &[1.0, -1.0, 2.5]).unwrap();
        let b = nmse(&[-4.5, 6.0, -9.0], &[-3.0, 3.0, -7.5]).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert_eq!(nmse(&[0.0], &[1.0]).unwrap_err(), Error::ZeroDenominator);
        assert!(matches!(nmse(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn split_partition_identity() {
        let flags = [
            (true, 1.0, 1.5),
            (false, 2.0, 0.0),
            (true, -1.0, -1.0),
            (false, 3.0, 2.0),
        ];
        let s = split_flags(&flags);
        let (sse, _) = sums(&[1.0, 2.0, -1.0, 3.0], &[1.5, 0.0, -1.0, 2.0]);
        assert!((s.passed_sse + s.failed_sse - sse).abs() < 1e-15);
        assert_eq!((s.n_passed, s.n_failed), (2, 2));
        let s = split_flags(&flags[..1]);
        assert!(s.failed_nmse.is_none() && s.passed_nmse.is_some());
    }

    #[test]
    fn estimator_names_roundtrip() {
        for e in Estimator::ALL {
            assert_eq!(Estimator::parse(e.as_str()), Some(e));
        }
    }
}
