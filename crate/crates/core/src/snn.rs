//! Synthetic nearest neighbors: donor partitioning, principal component
//! regression per subgroup, subspace diagnostics, counterfactual prediction
//! and intervals.
//!
//! For a target `(i, t, a)` the donors are the patients of arm `a` still
//! observed at visit `t`. They are split at random into `K` subgroups; each
//! subgroup regresses the target's features `Z_iT = [X_i, Y_iT]` onto the
//! rows of its own feature matrix, restricted to the top singular subspace,
//! and applies the resulting weights to the donors' outcomes at visit `t`.
//! Subgroups whose regression leaves a large residual (θ) or whose outcome
//! column sits far from the feature column space (φ) are discarded.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::spectra::{scale_columns, select_rank, svd, ColumnScaling, RankMode, SpectralDecomposition};
use crate::tensor::{
    donor_set, feature_matrix, feature_vector, observed_visits, FeatureVector, TargetTuple, TrialDataset,
};

/// Smallest singular value a regression may invert.
pub const MIN_SINGULAR_VALUE: f64 = 1e-12;

/// Denominator used when turning the training residual into a noise scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NoiseEstimator {
    /// `θ‖Z_iT‖ / (|T| + d)`.
    #[default]
    Linear,
    /// `θ‖Z_iT‖ / √(|T| + d)`, the root-mean-square residual.
    RootMean,
    /// `θ‖Z_iT‖ / √(|T| + d − b)`, the residual scale with the `b` fitted
    /// directions removed from the degrees of freedom.
    ResidualDof,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SnnConfig {
    pub n_subgroups: usize,
    /// Diagnostic tolerance; a model is kept when θ < alpha and φ < alpha.
    pub alpha: f64,
    pub rank_mode: RankMode,
    /// `None` means `max(10, d + |T| + 1)` for each target.
    pub min_subgroup_size: Option<usize>,
    pub z_ci: f64,
    pub seed: u64,
    pub noise_estimator: NoiseEstimator,
}

impl Default for SnnConfig {
    fn default() -> Self {
        SnnConfig {
            n_subgroups: 5,
            alpha: 0.2,
            rank_mode: RankMode::Universal,
            min_subgroup_size: None,
            z_ci: 1.96,
            seed: 0,
            noise_estimator: NoiseEstimator::Linear,
        }
    }
}

impl SnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subgroups == 0 {
            return Err(Error::InvalidConfig("n_subgroups must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig("alpha must lie in [0, 1]".into()));
        }
        if !(self.z_ci > 0.0 && self.z_ci.is_finite()) {
            return Err(Error::InvalidConfig("z_ci must be positive".into()));
        }
        if self.min_subgroup_size == Some(0) {
            return Err(Error::InvalidConfig("min_subgroup_size must be positive".into()));
        }
        match self.rank_mode {
            RankMode::Fixed(0) => Err(Error::InvalidConfig("fixed rank must be positive".into())),
            RankMode::Energy(f) if !(f > 0.0 && f <= 1.0) => {
                Err(Error::InvalidConfig("energy fraction must lie in (0, 1]".into()))
            }
            _ => Ok(()),
        }
    }

    fn min_size_for(&self, width: usize) -> usize {
        self.min_subgroup_size.unwrap_or_else(|| (width + 1).max(10))
    }
}

/// One donor subgroup's regression and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupModel {
    pub donor_indices: Vec<usize>,
    pub beta: Vec<f64>,
    pub rank: usize,
    pub theta: f64,
    pub phi: f64,
    /// Top-`rank` triplets of the scaled donor feature matrix.
    pub decomposition: SpectralDecomposition,
    pub standardization: ColumnScaling,
    pub point_estimate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum IntervalKind {
    EnsembleQuantile,
    RegressionFormula,
    None,
}

impl IntervalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IntervalKind::EnsembleQuantile => "ensemble-quantile",
            IntervalKind::RegressionFormula => "regression-formula",
            IntervalKind::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnnPrediction {
    pub target: TargetTuple,
    pub estimate: f64,
    pub per_model: Vec<SubgroupModel>,
    /// Indices into `per_model` of the models that passed the diagnostics.
    pub retained: Vec<usize>,
    pub passed: bool,
    /// Outcome (prediction) interval.
    pub interval: Option<(f64, f64)>,
    /// Interval for the expected outcome; only the regression formula gives one.
    pub mean_interval: Option<(f64, f64)>,
    pub interval_kind: IntervalKind,
    pub noise_std: Option<f64>,
}

impl SnnPrediction {
    pub fn theta_max(&self) -> f64 {
        self.per_model.iter().map(|m| m.theta).fold(0.0, f64::max)
    }

    pub fn phi_max(&self) -> f64 {
        self.per_model.iter().map(|m| m.phi).fold(0.0, f64::max)
    }
}

/// Randomly splits donors into `k` disjoint subgroups whose sizes differ
/// by at most one, lowering `k` so that subgroups hold `min_size` donors
/// where possible. Each subgroup is returned in ascending index order.
pub fn partition_donors<R: Rng + ?Sized>(
    donors: &[usize],
    k: usize,
    min_size: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    if donors.is_empty() {
        return Err(Error::EmptyDonors);
    }
    if k == 0 {
        return Err(Error::InvalidConfig("number of subgroups must be positive".into()));
    }
    let n = donors.len();
    let mut k_eff = k.min(n);
    if n < k * min_size.max(1) {
        k_eff = (n / min_size.max(1)).clamp(1, k);
        log::debug!("reducing subgroups from {k} to {k_eff} for {n} donors (min size {min_size})");
    }
    let mut shuffled = donors.to_vec();
    shuffled.shuffle(rng);
    let base = n / k_eff;
    let extra = n % k_eff;
    let mut groups = Vec::with_capacity(k_eff);
    let mut start = 0;
    for g in 0..k_eff {
        let len = base + usize::from(g < extra);
        let mut grp = shuffled[start..start + len].to_vec();
        grp.sort_unstable();
        groups.push(grp);
        start += len;
    }
    Ok(groups)
}

/// Weights `β = Σ_{ℓ≤b} σ_ℓ⁻¹ u_ℓ v_ℓᵀ z` from an existing decomposition.
pub fn pcr_weights(decomposition: &SpectralDecomposition, target: &[f64], rank: usize) -> Result<Vec<f64>> {
    let u = &decomposition.left_vectors;
    let v = &decomposition.right_vectors;
    if target.len() != v.rows() {
        return Err(Error::LengthMismatch {
            left: target.len(),
            right: v.rows(),
        });
    }
    let rank = rank.min(decomposition.len());
    let mut beta = alloc::vec![0.0; u.rows()];
    for l in 0..rank {
        let s = decomposition.singular_values[l];
        if s.is_nan() || s < MIN_SINGULAR_VALUE {
            return Err(Error::RankOvershoot { index: l + 1, value: s });
        }
        let coef = (0..v.rows()).map(|r| v[(r, l)] * target[r]).sum::<f64>() / s;
        for (j, b) in beta.iter_mut().enumerate() {
            *b += coef * u[(j, l)];
        }
    }
    Ok(beta)
}

/// Principal component regression of `target_features` on the rows of
/// `donor_matrix`, keeping `rank` components.
pub fn fit_pcr(target_features: &[f64], donor_matrix: &Matrix, rank: usize) -> Result<Vec<f64>> {
    if rank == 0 || rank > donor_matrix.rows().min(donor_matrix.cols()) {
        return Err(Error::InvalidConfig(alloc::format!(
            "rank {rank} outside 1..={}",
            donor_matrix.rows().min(donor_matrix.cols())
        )));
    }
    let dec = svd(donor_matrix)?;
    pcr_weights(&dec, target_features, rank)
}

fn residual_ratio(x: &[f64], basis: &Matrix, what: &'static str) -> Result<f64> {
    let nx = norm(x);
    if nx == 0.0 {
        return Err(Error::ZeroNorm { what });
    }
    let coeffs = basis.tr_mul_vec(x);
    let proj = basis.mul_vec(&coeffs);
    let resid: Vec<f64> = x.iter().zip(&proj).map(|(a, b)| a - b).collect();
    Ok((norm(&resid) / nx).clamp(0.0, 1.0))
}

/// `(θ, φ)`: relative distance of the target features from the donors' row
/// space, and of the donors' outcomes from their feature column space.
///
/// `target_features` must be in the model's scaled coordinates. The outcome
/// vector may be raw: a common rescaling leaves φ unchanged.
pub fn compute_diagnostics(
    target_features: &[f64],
    donor_outcomes_at_t: &[f64],
    model: &SubgroupModel,
) -> Result<(f64, f64)> {
    let dec = &model.decomposition;
    if donor_outcomes_at_t.len() != dec.left_vectors.rows() {
        return Err(Error::LengthMismatch {
            left: donor_outcomes_at_t.len(),
            right: dec.left_vectors.rows(),
        });
    }
    if target_features.len() != dec.right_vectors.rows() {
        return Err(Error::LengthMismatch {
            left: target_features.len(),
            right: dec.right_vectors.rows(),
        });
    }
    let theta = residual_ratio(target_features, &dec.right_vectors, "target feature vector")?;
    let phi = residual_ratio(donor_outcomes_at_t, &dec.left_vectors, "donor outcome vector")?;
    Ok((theta, phi))
}

/// Noise scale from a training residual: `θ‖Z‖ / (|T| + d)`.
pub fn estimate_noise_std(theta: f64, target_features: &FeatureVector) -> f64 {
    noise_std_from(
        theta,
        norm(&target_features.values),
        target_features.len(),
        0,
        NoiseEstimator::Linear,
    )
}

/// Noise scale for a fit of rank `rank` on `width` features.
pub fn noise_std_from(theta: f64, feature_norm: f64, width: usize, rank: usize, estimator: NoiseEstimator) -> f64 {
    let denom = match estimator {
        NoiseEstimator::Linear => width as f64,
        NoiseEstimator::RootMean => libm::sqrt(width as f64),
        NoiseEstimator::ResidualDof => libm::sqrt(width.saturating_sub(rank).max(1) as f64),
    };
    theta * feature_norm / denom
}

/// Linear-interpolation percentile on sorted data, `q ∈ [0, 1]`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Middle 95% of the per-model estimates.
pub fn prediction_interval_ensemble(per_model_estimates: &[f64]) -> Result<(f64, f64)> {
    if per_model_estimates.len() < 2 {
        return Err(Error::TooFewEstimates {
            needed: 2,
            got: per_model_estimates.len(),
        });
    }
    if per_model_estimates.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut sorted = per_model_estimates.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((percentile(&sorted, 0.025), percentile(&sorted, 0.975)))
}

/// `⟨Z, V_b Σ_b⁻² V_bᵀ Z⟩`, which equals `‖β‖²` for the fitted weights.
pub fn interval_quadratic_form(model: &SubgroupModel, target_features: &[f64]) -> Result<f64> {
    let dec = &model.decomposition;
    let proj = dec.right_vectors.tr_mul_vec(target_features);
    let mut q = 0.0;
    for (l, c) in proj.iter().enumerate() {
        let s = dec.singular_values[l];
        if s.is_nan() || s < MIN_SINGULAR_VALUE {
            return Err(Error::RankOvershoot { index: l + 1, value: s });
        }
        q += (c / s) * (c / s);
    }
    Ok(q)
}

/// Homoskedastic intervals `(mean, outcome)` for a single retained model,
/// centered at its point estimate. `target_features` are in the model's
/// scaled coordinates.
pub fn prediction_interval_single(
    model: &SubgroupModel,
    target_features: &[f64],
    z_ci: f64,
    noise_std: f64,
) -> Result<((f64, f64), (f64, f64))> {
    if noise_std.is_nan() || noise_std < 0.0 {
        return Err(Error::InvalidConfig("noise_std must be nonnegative".into()));
    }
    let q = interval_quadratic_form(model, target_features)?;
    let c = model.point_estimate;
    let mean_half = z_ci * noise_std * libm::sqrt(q);
    let outcome_half = z_ci * noise_std * libm::sqrt(1.0 + q);
    Ok(((c - mean_half, c + mean_half), (c - outcome_half, c + outcome_half)))
}

/// Deterministic per-target stream seed.
pub fn target_seed(seed: u64, target: TargetTuple) -> u64 {
    let mut h = seed;
    for v in [target.patient as u64, target.visit as u64, target.arm as u64] {
        h = splitmix64(h ^ splitmix64(v.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fits one subgroup model on raw donor features and outcomes.
pub fn fit_subgroup(
    target_raw: &[f64],
    donor_indices: Vec<usize>,
    donor_features_raw: &Matrix,
    donor_outcomes: &[f64],
    rank_mode: RankMode,
) -> Result<SubgroupModel> {
    let (scaled, scaling) = scale_columns(donor_features_raw);
    let z = scaling.apply(target_raw);
    let dec = svd(&scaled)?;
    let (m, p) = (scaled.rows(), scaled.cols());
    let numerical_rank = dec
        .singular_values
        .iter()
        .take_while(|&&s| s >= MIN_SINGULAR_VALUE)
        .count()
        .max(1);
    let selected = select_rank(&dec.singular_values, m, p, rank_mode)?;
    let rank = selected.min(numerical_rank);
    if rank < selected {
        log::debug!("rank {selected} clamped to numerical rank {rank}");
    }
    let beta = pcr_weights(&dec, &z, rank)?;
    let mut model = SubgroupModel {
        donor_indices,
        beta,
        rank,
        theta: 0.0,
        phi: 0.0,
        decomposition: dec.truncated(rank),
        standardization: scaling,
        point_estimate: 0.0,
    };
    let (theta, phi) = compute_diagnostics(&z, donor_outcomes, &model)?;
    model.theta = theta;
    model.phi = phi;
    model.point_estimate = dot(donor_outcomes, &model.beta);
    Ok(model)
}

/// Counterfactual estimate for one `(patient, visit, arm)` tuple.
pub fn predict(dataset: &TrialDataset, target: TargetTuple, config: &SnnConfig) -> Result<SnnPrediction> {
    config.validate()?;
    dataset.check_target(target)?;
    let TargetTuple { patient, visit, arm } = target;
    let donors: Vec<usize> = donor_set(dataset, visit, arm)
        .into_iter()
        .filter(|&j| j != patient)
        .collect();
    let visit_set = observed_visits(dataset, patient, arm, visit);
    let features = feature_vector(dataset, patient, &visit_set, arm)?;
    predict_with_donors(dataset, target, &donors, &features, config)
}

/// As [`predict`], with an explicit donor pool and target feature vector.
pub fn predict_with_donors(
    dataset: &TrialDataset,
    target: TargetTuple,
    donors: &[usize],
    features: &FeatureVector,
    config: &SnnConfig,
) -> Result<SnnPrediction> {
    if donors.is_empty() {
        return Err(Error::EmptyDonors);
    }
    if features.is_empty() {
        return Err(Error::DegenerateFeatures);
    }
    let TargetTuple { visit, arm, .. } = target;
    let mut rng = ChaCha8Rng::seed_from_u64(target_seed(config.seed, target));
    let groups = partition_donors(
        donors,
        config.n_subgroups,
        config.min_size_for(features.len()),
        &mut rng,
    )?;

    let mut per_model = Vec::with_capacity(groups.len());
    let mut raw_matrices = Vec::with_capacity(groups.len());
    for group in groups {
        let zp = feature_matrix(dataset, &group, &features.visit_set, arm)?;
        let y: Vec<f64> = group.iter().map(|&j| dataset.observed(j, visit, arm)).collect();
        per_model.push(fit_subgroup(&features.values, group, &zp, &y, config.rank_mode)?);
        raw_matrices.push(zp);
    }

    let retained: Vec<usize> = per_model
        .iter()
        .enumerate()
        .filter(|(_, m)| m.theta < config.alpha && m.phi < config.alpha)
        .map(|(k, _)| k)
        .collect();
    let passed = !retained.is_empty();
    if !passed {
        log::debug!(
            "target ({}, {}, {}) failed diagnostics in all {} models",
            target.patient,
            target.visit + 1,
            target.arm,
            per_model.len()
        );
    }
    let used: Vec<usize> = if passed {
        retained.clone()
    } else {
        (0..per_model.len()).collect()
    };
    let estimates: Vec<f64> = used.iter().map(|&k| per_model[k].point_estimate).collect();
    let estimate = estimates.iter().sum::<f64>() / estimates.len() as f64;

    let (mut interval, mut mean_interval, mut interval_kind, mut noise_std) = (None, None, IntervalKind::None, None);
    if estimates.len() >= 2 {
        interval = Some(prediction_interval_ensemble(&estimates)?);
        interval_kind = IntervalKind::EnsembleQuantile;
    } else if passed {
        let k = used[0];
        let model = &per_model[k];
        // Residual in raw units; column rescaling commutes with the fit.
        let fitted = raw_matrices[k].tr_mul_vec(&model.beta);
        let resid: Vec<f64> = features.values.iter().zip(&fitted).map(|(a, b)| a - b).collect();
        let raw_norm = norm(&features.values);
        let theta_raw = if raw_norm > 0.0 { norm(&resid) / raw_norm } else { 0.0 };
        let nu = noise_std_from(theta_raw, raw_norm, features.len(), model.rank, config.noise_estimator);
        let z = model.standardization.apply(&features.values);
        let (mean_iv, outcome_iv) = prediction_interval_single(model, &z, config.z_ci, nu)?;
        interval = Some(outcome_iv);
        mean_interval = Some(mean_iv);
        interval_kind = IntervalKind::RegressionFormula;
        noise_std = Some(nu);
    }

    Ok(SnnPrediction {
        target,
        estimate,
        per_model,
        retained,
        passed,
        interval,
        mean_interval,
        interval_kind,
        noise_std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        libm::fabs(a - b) <= tol
    }

    #[test]
    fn partition_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let donors: Vec<usize> = (0..10).collect();
        let g = partition_donors(&donors, 2, 1, &mut rng).unwrap();
        assert_eq!(g.iter().map(Vec::len).collect::<Vec<_>>(), vec![5, 5]);
        let donors: Vec<usize> = (0..11).collect();
        let g = partition_donors(&donors, 2, 1, &mut rng).unwrap();
        let mut sizes: Vec<_> = g.iter().map(Vec::len).collect();
        sizes.sort();
        assert_eq!(sizes, vec![5, 6]);
        let mut all: Vec<usize> = g.concat();
        all.sort();
        assert_eq!(all, donors);
        // ⌊8/4⌋ = 2 subgroups
        let donors: Vec<usize> = (0..8).collect();
        assert_eq!(partition_donors(&donors, 5, 4, &mut rng).unwrap().len(), 2);
        assert_eq!(partition_donors(&[], 2, 1, &mut rng).unwrap_err(), Error::EmptyDonors);
    }

    #[test]
    fn pcr_examples() {
        let beta = fit_pcr(&[1.0, 0.0], &Matrix::identity(2), 2).unwrap();
        assert!(close(beta[0], 1.0, 1e-14) && close(beta[1], 0.0, 1e-14));
        // û₁ ∝ (1,2)/√5, β = c(1,2) minimizing ‖(3,3) − c(5,5)‖ gives c = 0.6.
        let m = Matrix::from_rows(&[[1.0, 1.0], [2.0, 2.0]]);
        let beta = fit_pcr(&[3.0, 3.0], &m, 1).unwrap();
        assert!(close(beta[0], 0.6, 1e-12) && close(beta[1], 1.2, 1e-12), "{beta:?}");
        assert!(matches!(
            fit_pcr(&[3.0, 3.0], &m, 2),
            Err(Error::RankOvershoot { index: 2, .. })
        ));
    }

    fn model_for(m: &Matrix, z: &[f64], y: &[f64], rank: usize) -> SubgroupModel {
        fit_subgroup(z, (0..m.rows()).collect(), m, y, RankMode::Fixed(rank)).unwrap()
    }

    #[test]
    fn diagnostics_extremes() {
        let m = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]]);
        let inside = model_for(&m, &[2.0, -1.0, 0.0], &[1.0, 2.0, 3.0], 2);
        assert!(inside.theta < 1e-12);
        let orth = model_for(&m, &[0.0, 0.0, 5.0], &[1.0, 2.0, 3.0], 2);
        assert!(close(orth.theta, 1.0, 1e-12));
        let err = compute_diagnostics(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0], &inside).unwrap_err();
        assert!(matches!(err, Error::ZeroNorm { .. }));
    }

    #[test]
    fn noise_std_examples() {
        let fv = FeatureVector {
            values: vec![6.0, 8.0, 0.0, 0.0, 0.0],
            visit_set: vec![0],
        };
        assert_eq!(estimate_noise_std(0.0, &fv), 0.0);
        assert!(close(estimate_noise_std(0.5, &fv), 1.0, 1e-15));
        assert!(close(
            noise_std_from(0.5, 10.0, 4, 2, NoiseEstimator::RootMean),
            2.5,
            1e-15
        ));
        assert!(close(
            noise_std_from(0.5, 10.0, 6, 2, NoiseEstimator::ResidualDof),
            2.5,
            1e-15
        ));
        assert!(close(
            noise_std_from(0.5, 10.0, 2, 2, NoiseEstimator::ResidualDof),
            5.0,
            1e-15
        ));
    }

    #[test]
    fn ensemble_interval_examples() {
        assert_eq!(prediction_interval_ensemble(&[3.0, 3.0, 3.0]).unwrap(), (3.0, 3.0));
        let (lo, hi) = prediction_interval_ensemble(&[4.0, 2.0, 1.0, 3.0]).unwrap();
        // positions 0.075 and 2.925 on (1,2,3,4)
        assert!(close(lo, 1.075, 1e-12) && close(hi, 3.925, 1e-12));
        assert!(matches!(
            prediction_interval_ensemble(&[1.0]),
            Err(Error::TooFewEstimates { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn single_interval_nesting() {
        let m = Matrix::from_rows(&[[1.0, 0.5], [0.3, 1.0], [1.0, 1.0]]);
        let model = model_for(&m, &[0.7, 0.2], &[1.0, 2.0, 3.0], 2);
        let z = model.standardization.apply(&[0.7, 0.2]);
        let (mi, oi) = prediction_interval_single(&model, &z, 1.96, 0.0).unwrap();
        assert_eq!(mi, (model.point_estimate, model.point_estimate));
        assert_eq!(oi, mi);
        let (mi, oi) = prediction_interval_single(&model, &z, 1.96, 0.3).unwrap();
        assert!(oi.0 < mi.0 && mi.1 < oi.1);
        let q = interval_quadratic_form(&model, &z).unwrap();
        assert!(close(q, dot(&model.beta, &model.beta), 1e-10));
    }

    #[test]
    fn config_validation() {
        assert!(SnnConfig::default().validate().is_ok());
        let bad = SnnConfig {
            alpha: 1.5,
            ..SnnConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SnnConfig {
            rank_mode: RankMode::Fixed(0),
            ..SnnConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
