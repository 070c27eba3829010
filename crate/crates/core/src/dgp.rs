//! Synthetic trials from a low-rank latent factor model, and dropout
//! simulation under MCAR, MAR and MNAR withdrawal mechanisms.
//!
//! Outcomes follow `Y_it(a) = ⟨u_i, v_t(a)⟩ + ε` and covariates
//! `X_iℓ = ⟨u_i, w_ℓ⟩ + η`, so outcomes and covariates share the patient
//! factors `u_i`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::tensor::TrialDataset;

/// Labels used for generated covariates when `d = 4`.
pub const DEFAULT_COVARIATE_LABELS: [&str; 4] = ["age", "sex", "baseline_adascog", "baseline_mmse"];
/// The covariate holding the pre-trial outcome Y_i0.
pub const DEFAULT_BASELINE_LABEL: &str = "baseline_adascog";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FactorDistribution {
    #[default]
    Uniform,
    Gaussian,
}

impl FactorDistribution {
    fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            FactorDistribution::Uniform => Uniform::new(-1.0, 1.0).expect("valid range").sample(rng),
            FactorDistribution::Gaussian => StandardNormal.sample(rng),
        }
    }
}

/// Noise standard deviation, absolute or as a fraction of the signal RMS.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NoiseLevel {
    Absolute(f64),
    RelativeToSignal(f64),
}

impl Default for NoiseLevel {
    fn default() -> Self {
        NoiseLevel::Absolute(0.0)
    }
}

impl NoiseLevel {
    fn resolve(self, signal_rms: f64) -> f64 {
        match self {
            NoiseLevel::Absolute(s) => s,
            NoiseLevel::RelativeToSignal(f) => f * signal_rms,
        }
    }

    fn value(self) -> f64 {
        match self {
            NoiseLevel::Absolute(s) | NoiseLevel::RelativeToSignal(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct GeneratorConfig {
    pub n_patients: usize,
    pub n_visits: usize,
    pub n_arms: usize,
    pub n_covariates: usize,
    pub rank: usize,
    pub factor_distribution: FactorDistribution,
    pub outcome_noise: NoiseLevel,
    /// Defaults to the outcome noise level when absent.
    pub covariate_noise: Option<NoiseLevel>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_patients: 1130,
            n_visits: 5,
            n_arms: 3,
            n_covariates: 4,
            rank: 2,
            factor_distribution: FactorDistribution::Uniform,
            outcome_noise: NoiseLevel::RelativeToSignal(0.1),
            covariate_noise: None,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("n_patients", self.n_patients),
            ("n_visits", self.n_visits),
            ("n_arms", self.n_arms),
            ("n_covariates", self.n_covariates),
            ("rank", self.rank),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.n_patients < self.n_arms {
            return Err(Error::InvalidConfig("fewer patients than arms".into()));
        }
        let covariate_noise = self.covariate_noise.unwrap_or(self.outcome_noise);
        for n in [self.outcome_noise, covariate_noise] {
            if !(n.value() >= 0.0 && n.value().is_finite()) {
                return Err(Error::InvalidConfig(
                    "noise levels must be finite and nonnegative".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Ground-truth factors of a synthetic trial.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFactorModel {
    pub rank: usize,
    /// N×r, rows u_i.
    pub patient_factors: Matrix,
    /// (T·A)×r, row `t·A + a` is v_t(a).
    pub visit_arm_factors: Matrix,
    /// d×r, rows w_ℓ.
    pub covariate_factors: Matrix,
    pub outcome_noise_std: f64,
    pub covariate_noise_std: f64,
    pub factor_distribution: FactorDistribution,
    pub n_visits: usize,
    pub n_arms: usize,
}

fn random_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, dist: FactorDistribution, rng: &mut R) -> Matrix {
    let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    Matrix::from_row_major(rows, cols, data)
}

impl LatentFactorModel {
    /// Draws factors and resolves relative noise levels against the RMS of
    /// the noiseless outcome tensor and covariate matrix.
    pub fn sample<R: Rng + ?Sized>(config: &GeneratorConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let dist = config.factor_distribution;
        let r = config.rank;
        let u = random_matrix(config.n_patients, r, dist, rng);
        let v = random_matrix(config.n_visits * config.n_arms, r, dist, rng);
        let w = random_matrix(config.n_covariates, r, dist, rng);
        let rms = |m: &Matrix| m.frobenius_norm() / libm::sqrt((m.rows() * m.cols()) as f64);
        let outcome_rms = rms(&u.matmul(&v.transpose()));
        let covariate_rms = rms(&u.matmul(&w.transpose()));
        Ok(LatentFactorModel {
            rank: r,
            patient_factors: u,
            visit_arm_factors: v,
            covariate_factors: w,
            outcome_noise_std: config.outcome_noise.resolve(outcome_rms),
            covariate_noise_std: config
                .covariate_noise
                .unwrap_or(config.outcome_noise)
                .resolve(covariate_rms),
            factor_distribution: dist,
            n_visits: config.n_visits,
            n_arms: config.n_arms,
        })
    }

    pub fn n_patients(&self) -> usize {
        self.patient_factors.rows()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_factors.rows()
    }

    /// ⟨u_i, v_t(a)⟩
    pub fn expected_outcome(&self, patient: usize, visit: usize, arm: usize) -> f64 {
        dot(
            self.patient_factors.row(patient),
            self.visit_arm_factors.row(visit * self.n_arms + arm),
        )
    }

    /// ⟨u_i, w_ℓ⟩
    pub fn expected_covariate(&self, patient: usize, covariate: usize) -> f64 {
        dot(self.patient_factors.row(patient), self.covariate_factors.row(covariate))
    }
}

/// Noiseless potential outcomes for every patient, visit and arm.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    n_patients: usize,
    n_arms: usize,
    values: Vec<f64>,
}

impl GroundTruth {
    pub fn get(&self, patient: usize, visit: usize, arm: usize) -> f64 {
        self.values[(visit * self.n_patients + patient) * self.n_arms + arm]
    }

    pub fn n_visits(&self) -> usize {
        self.values.len() / (self.n_patients * self.n_arms)
    }

    /// Mode-1 unfolding restricted to one arm: N×T.
    pub fn arm_matrix(&self, arm: usize) -> Matrix {
        let t_count = self.n_visits();
        let mut m = Matrix::zeros(self.n_patients, t_count);
        for i in 0..self.n_patients {
            for t in 0..t_count {
                m[(i, t)] = self.get(i, t, arm);
            }
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedTrial {
    pub dataset: TrialDataset,
    pub ground_truth: GroundTruth,
}

pub fn default_covariate_labels(d: usize) -> Vec<String> {
    (0..d)
        .map(|l| match DEFAULT_COVARIATE_LABELS.get(l) {
            Some(s) => s.to_string(),
            None => format!("cov_{}", l + 1),
        })
        .collect()
}

pub fn patient_label(i: usize) -> String {
    format!("P{:04}", i + 1)
}

pub fn arm_label(a: usize) -> String {
    format!("arm{a}")
}

/// Balanced randomization: sizes differ by at most one, arms `0..n % A`
/// receive the extra patient.
pub fn assign_arms<R: Rng + ?Sized>(n_patients: usize, n_arms: usize, rng: &mut R) -> Vec<usize> {
    let mut arms: Vec<usize> = (0..n_patients).map(|i| i % n_arms).collect();
    arms.shuffle(rng);
    arms
}

/// Fully observed trial: every patient is seen at every visit of their arm.
pub fn generate_trial<R: Rng + ?Sized>(model: &LatentFactorModel, rng: &mut R) -> Result<GeneratedTrial> {
    let (n, t_count, a_count, d) = (model.n_patients(), model.n_visits, model.n_arms, model.n_covariates());
    let arms = assign_arms(n, a_count, rng);
    let mut truth = vec![0.0; t_count * n * a_count];
    for t in 0..t_count {
        for i in 0..n {
            for a in 0..a_count {
                truth[(t * n + i) * a_count + a] = model.expected_outcome(i, t, a);
            }
        }
    }
    let ground_truth = GroundTruth {
        n_patients: n,
        n_arms: a_count,
        values: truth,
    };
    let mut trajectories = Vec::with_capacity(n);
    for (i, &a) in arms.iter().enumerate() {
        let traj = (0..t_count)
            .map(|t| {
                let e: f64 = StandardNormal.sample(rng);
                ground_truth.get(i, t, a) + model.outcome_noise_std * e
            })
            .collect();
        trajectories.push(traj);
    }
    let mut cov = Matrix::zeros(n, d);
    for i in 0..n {
        for l in 0..d {
            let e: f64 = StandardNormal.sample(rng);
            cov[(i, l)] = model.expected_covariate(i, l) + model.covariate_noise_std * e;
        }
    }
    let dataset = TrialDataset::from_trajectories(
        (0..n).map(patient_label).collect(),
        (0..a_count).map(arm_label).collect(),
        default_covariate_labels(d),
        cov,
        t_count,
        arms.into_iter().map(Some).collect(),
        trajectories,
    )?;
    Ok(GeneratedTrial { dataset, ground_truth })
}

/// Exponentially weighted mean with decay `λ = 2 / (span + 1)`; the last
/// element carries weight 1, the one before it `1 − λ`, and so on.
pub fn ewm(values: &[f64], span: usize) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput { what: "ewm values" });
    }
    if span == 0 {
        return Err(Error::InvalidConfig("ewm span must be positive".into()));
    }
    let decay = 1.0 - 2.0 / (span as f64 + 1.0);
    let (mut num, mut den, mut w) = (0.0, 0.0, 1.0);
    for &x in values.iter().rev() {
        num += w * x;
        den += w;
        w *= decay;
    }
    Ok(num / den)
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `1 / (1 + exp(−ewm(deltas, span)))`.
pub fn dropout_probability(deltas: &[f64], span: usize) -> Result<f64> {
    Ok(logistic(ewm(deltas, span)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum MissingnessMechanism {
    Mcar,
    Mar,
    Mnar,
}

impl MissingnessMechanism {
    pub const ALL: [MissingnessMechanism; 3] = [Self::Mcar, Self::Mar, Self::Mnar];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mcar => "mcar",
            Self::Mar => "mar",
            Self::Mnar => "mnar",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mcar" => Some(Self::Mcar),
            "mar" => Some(Self::Mar),
            "mnar" => Some(Self::Mnar),
            _ => None,
        }
    }
}

/// Fraction of each arm's original size withdrawing at visits 2, 3, ….
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DropoutRateSchedule {
    /// `rates[k]` applies to (1-based) visit `k + 2`.
    pub rates: Vec<f64>,
}

impl Default for DropoutRateSchedule {
    fn default() -> Self {
        DropoutRateSchedule {
            rates: vec![0.10, 0.08, 0.06, 0.04],
        }
    }
}

impl DropoutRateSchedule {
    pub fn validate(&self, n_visits: usize) -> Result<()> {
        if self.rates.len() + 1 > n_visits {
            return Err(Error::InvalidConfig(format!(
                "schedule covers {} visits after the first but the trial has {n_visits} visits",
                self.rates.len()
            )));
        }
        if self.rates.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(Error::InvalidConfig("dropout rates must lie in [0, 1)".into()));
        }
        if self.rates.iter().sum::<f64>() >= 1.0 {
            return Err(Error::InvalidConfig("dropout rates must sum to less than 1".into()));
        }
        Ok(())
    }

    /// Rate for 0-based visit index `visit` (0 for the first visit).
    pub fn rate(&self, visit: usize) -> f64 {
        if visit == 0 {
            0.0
        } else {
            self.rates.get(visit - 1).copied().unwrap_or(0.0)
        }
    }

    /// `round(ρ(t)·N_a)`, halves rounded up.
    pub fn quota(&self, visit: usize, arm_size: usize) -> usize {
        libm::floor(self.rate(visit) * arm_size as f64 + 0.5) as usize
    }
}

/// A simulated withdrawal: the patient is unobserved from `first_missing_visit` on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct DropoutRecord {
    pub patient: usize,
    pub arm: usize,
    /// 0-based.
    pub first_missing_visit: usize,
    pub mechanism: MissingnessMechanism,
}

/// Passes over the active set before a Bernoulli quota is declared unreachable.
pub const MAX_SAMPLING_PASSES: usize = 100_000;

/// Withdraws `round(ρ(t)·N_a)` still-active patients per arm and visit.
///
/// Returns the masked dataset and the dropout set in arm, then patient order.
/// `baseline_column` indexes the covariate holding Y_i0; only MAR and MNAR
/// read it.
pub fn simulate_dropouts<R: Rng + ?Sized>(
    dataset: &TrialDataset,
    mechanism: MissingnessMechanism,
    schedule: &DropoutRateSchedule,
    baseline_column: usize,
    rng: &mut R,
) -> Result<(TrialDataset, Vec<DropoutRecord>)> {
    let t_count = dataset.n_visits();
    schedule.validate(t_count)?;
    if baseline_column >= dataset.n_covariates() {
        return Err(Error::IndexOutOfRange {
            what: "baseline column",
            index: baseline_column,
            size: dataset.n_covariates(),
        });
    }
    if (0..dataset.n_patients()).any(|i| dataset.arm_of(i).is_some() && !dataset.is_complier(i)) {
        return Err(Error::PreexistingDropouts);
    }
    let mut observed_through: Vec<usize> = (0..dataset.n_patients()).map(|i| dataset.observed_through(i)).collect();
    let mut records = Vec::new();
    for arm in 0..dataset.n_arms() {
        let members = dataset.arm_members(arm);
        let n_a = members.len();
        let mut active = members.clone();
        for visit in 1..t_count {
            let quota = schedule.quota(visit, n_a);
            if quota == 0 {
                continue;
            }
            if quota > active.len() {
                return Err(Error::QuotaExceeded {
                    arm,
                    visit: visit + 1,
                    quota,
                    active: active.len(),
                });
            }
            let selected = match mechanism {
                MissingnessMechanism::Mcar => active.choose_multiple(rng, quota).copied().collect(),
                _ => {
                    let probs = active
                        .iter()
                        .map(|&i| withdrawal_probability(dataset, i, arm, visit, mechanism, baseline_column))
                        .collect::<Result<Vec<f64>>>()?;
                    bernoulli_quota(&probs, quota, rng)
                        .ok_or(Error::QuotaNotMet {
                            arm,
                            visit: visit + 1,
                            passes: MAX_SAMPLING_PASSES,
                        })?
                        .into_iter()
                        .map(|k| active[k])
                        .collect::<Vec<usize>>()
                }
            };
            for &i in &selected {
                observed_through[i] = visit;
                records.push(DropoutRecord {
                    patient: i,
                    arm,
                    first_missing_visit: visit,
                    mechanism,
                });
            }
            active.retain(|i| !selected.contains(i));
        }
    }
    records.sort_by_key(|r| (r.arm, r.patient));
    Ok((dataset.with_truncation(&observed_through)?, records))
}

/// b_i(t) for 0-based visit `visit ≥ 1`.
///
/// MAR smooths Y_1..Y_{t−1} (span t−1); MNAR smooths Y_{t−1}..Y_T
/// (span T−(t−1)); both relative to the baseline covariate.
pub fn withdrawal_probability(
    dataset: &TrialDataset,
    patient: usize,
    arm: usize,
    visit: usize,
    mechanism: MissingnessMechanism,
    baseline_column: usize,
) -> Result<f64> {
    let baseline = dataset.covariate_row(patient)[baseline_column];
    let t_count = dataset.n_visits();
    let (range, span) = match mechanism {
        MissingnessMechanism::Mcar => return Ok(0.5),
        MissingnessMechanism::Mar => (0..visit, visit),
        MissingnessMechanism::Mnar => (visit - 1..t_count, t_count - visit),
    };
    let deltas: Vec<f64> = range
        .map(|t| {
            dataset
                .outcome(patient, t, arm)
                .map(|y| y - baseline)
                .ok_or(Error::VisitNotObserved { patient, visit: t, arm })
        })
        .collect::<Result<_>>()?;
    dropout_probability(&deltas, span)
}

/// Repeated passes in random order, one Bernoulli draw per unselected
/// patient per pass, until `quota` are selected.
fn bernoulli_quota<R: Rng + ?Sized>(probs: &[f64], quota: usize, rng: &mut R) -> Option<Vec<usize>> {
    let mut chosen = vec![false; probs.len()];
    let mut selected = Vec::with_capacity(quota);
    let mut order: Vec<usize> = (0..probs.len()).collect();
    for _ in 0..MAX_SAMPLING_PASSES {
        order.shuffle(rng);
        for &k in &order {
            if chosen[k] {
                continue;
            }
            if rng.random_bool(probs[k].clamp(0.0, 1.0)) {
                chosen[k] = true;
                selected.push(k);
                if selected.len() == quota {
                    return Some(selected);
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        libm::fabs(a - b) <= tol
    }

    #[test]
    fn ewm_examples() {
        assert_eq!(ewm(&[1.0, 5.0, 9.0], 1).unwrap(), 9.0);
        // λ = 0.5: weights (0.25, 0.5, 1)
        assert!(close(ewm(&[1.0, 2.0, 3.0], 3).unwrap(), 4.25 / 1.75, 1e-12));
        assert!(close(ewm(&[2.5; 4], 7).unwrap(), 2.5, 1e-15));
        assert!(ewm(&[], 2).is_err());
    }

    #[test]
    fn dropout_probability_examples() {
        assert_eq!(dropout_probability(&[0.0, 0.0], 2).unwrap(), 0.5);
        assert!(close(
            dropout_probability(&[1.0], 1).unwrap(),
            1.0 / (1.0 + libm::exp(-1.0)),
            1e-15
        ));
        assert!(dropout_probability(&[800.0], 1).unwrap() > 1.0 - 1e-12);
        assert!(dropout_probability(&[-800.0], 1).unwrap() < 1e-12);
    }

    #[test]
    fn arm_sizes_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let count = |v: &[usize], a| v.iter().filter(|&&x| x == a).count();
        let arms = assign_arms(9, 3, &mut rng);
        assert!((0..3).all(|a| count(&arms, a) == 3));
        let arms = assign_arms(10, 3, &mut rng);
        let mut sizes: Vec<_> = (0..3).map(|a| count(&arms, a)).collect();
        sizes.sort();
        assert_eq!(sizes, vec![3, 3, 4]);
        let a1 = assign_arms(50, 3, &mut ChaCha8Rng::seed_from_u64(9));
        let a2 = assign_arms(50, 3, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a1, a2);
    }

    #[test]
    fn quota_rounding() {
        let s = DropoutRateSchedule::default();
        assert_eq!((1..5).map(|t| s.quota(t, 100)).collect::<Vec<_>>(), vec![10, 8, 6, 4]);
        assert_eq!(s.quota(0, 100), 0);
        assert_eq!(s.quota(1, 25), 3);
        assert!(DropoutRateSchedule { rates: vec![0.6, 0.5] }.validate(5).is_err());
        assert!(s.validate(4).is_err());
    }

    #[test]
    fn generator_validation() {
        let bad = GeneratorConfig {
            rank: 0,
            ..GeneratorConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
