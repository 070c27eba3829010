//! Comparison estimators: arm mean over compliers, last observation carried
//! forward, and nearest-neighbor matching.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::mean;
use crate::spectra::standardize_columns;
use crate::tensor::{feature_matrix, feature_vector, observed_visits, TargetTuple, TrialDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum MatchingMetric {
    EuclideanStandardized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct MatchingConfig {
    pub n_neighbors: usize,
    pub metric: MatchingMetric,
}

impl Default for MatchingConfig {
    fn default() -> Self {
        MatchingConfig {
            n_neighbors: 5,
            metric: MatchingMetric::EuclideanStandardized,
        }
    }
}

fn outcomes_at(dataset: &TrialDataset, patients: &[usize], visit: usize, arm: usize) -> Result<Vec<f64>> {
    patients
        .iter()
        .map(|&j| {
            dataset
                .outcome(j, visit, arm)
                .ok_or(Error::VisitNotObserved { patient: j, visit, arm })
        })
        .collect()
}

/// Mean outcome of the compliers at `(visit, arm)`.
pub fn naive_predict(dataset: &TrialDataset, visit: usize, arm: usize, compliers: &[usize]) -> Result<f64> {
    if compliers.is_empty() {
        return Err(Error::EmptyDonors);
    }
    Ok(mean(&outcomes_at(dataset, compliers, visit, arm)?))
}

/// The patient's outcome at their last observed visit before `target_visit`.
pub fn locf_predict(dataset: &TrialDataset, patient: usize, arm: usize, target_visit: usize) -> Result<f64> {
    observed_visits(dataset, patient, arm, target_visit)
        .last()
        .map(|&t| dataset.observed(patient, t, arm))
        .ok_or(Error::NoPriorObservation {
            patient,
            arm,
            visit: target_visit,
        })
}

/// Mean outcome of the `n_neighbors` pool members closest to the target in
/// standardized `[X, Y_T]` space. Ties go to the lower patient index.
pub fn matching_predict(
    dataset: &TrialDataset,
    target: TargetTuple,
    donor_pool: &[usize],
    config: &MatchingConfig,
) -> Result<f64> {
    if donor_pool.is_empty() {
        return Err(Error::EmptyDonors);
    }
    if config.n_neighbors == 0 {
        return Err(Error::InvalidConfig("n_neighbors must be at least 1".into()));
    }
    let TargetTuple { patient, visit, arm } = target;
    let visit_set = observed_visits(dataset, patient, arm, visit);
    let z = feature_vector(dataset, patient, &visit_set, arm)?;
    let pool = feature_matrix(dataset, donor_pool, &visit_set, arm)?;
    let neighbors = nearest_neighbors(&pool, &z.values, config.n_neighbors);
    let chosen: Vec<usize> = neighbors.iter().map(|&r| donor_pool[r]).collect();
    Ok(mean(&outcomes_at(dataset, &chosen, visit, arm)?))
}

/// Row indices of the `k` rows nearest to `target` after standardizing
/// columns with the pool's statistics.
pub fn nearest_neighbors(pool: &crate::linalg::Matrix, target: &[f64], k: usize) -> Vec<usize> {
    let (scaled, scaling) = if pool.rows() >= 2 {
        let (s, r) = standardize_columns(pool);
        (s, Some(r))
    } else {
        (pool.clone(), None)
    };
    let t = match &scaling {
        Some(r) => r.apply(target),
        None => target.to_vec(),
    };
    let mut dist: Vec<(f64, usize)> = (0..scaled.rows())
        .map(|r| {
            let d: f64 = scaled.row(r).iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum();
            (d, r)
        })
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    dist.into_iter().take(k).map(|(_, r)| r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::tensor::DatasetBuilder;
    use alloc::string::String;
    use alloc::vec;

    fn dataset() -> TrialDataset {
        // p0, p1 compliers; p2 dropped after visit 3; p3 only visit 1.
        let mut b = DatasetBuilder::new(vec![String::from("x")]);
        let cov = [0.0, 1.0, 0.2, 5.0];
        for (i, c) in cov.iter().enumerate() {
            b.add_patient(i + 1, &alloc::format!("p{i}"), vec![*c]).unwrap();
        }
        let mut row = 1;
        let mut add = |p: &str, v: usize, y: f64| {
            b.add_outcome(row, p, v, "A", y).unwrap();
            row += 1;
        };
        for v in 1..=5 {
            add("p0", v, 3.0 + v as f64);
            add("p1", v, 5.0 + v as f64);
        }
        add("p2", 1, 20.0);
        add("p2", 2, 21.0);
        add("p2", 3, 22.0);
        add("p3", 1, 9.0);
        b.finish(None).unwrap()
    }

    #[test]
    fn naive_mean() {
        let ds = dataset();
        assert_eq!(naive_predict(&ds, 0, 0, &[0, 1]).unwrap(), 5.0);
        assert_eq!(naive_predict(&ds, 0, 0, &[1, 0]).unwrap(), 5.0);
        assert_eq!(naive_predict(&ds, 4, 0, &[1]).unwrap(), 10.0);
        assert_eq!(naive_predict(&ds, 4, 0, &[]).unwrap_err(), Error::EmptyDonors);
    }

    #[test]
    fn locf_carries_last() {
        let ds = dataset();
        assert_eq!(locf_predict(&ds, 2, 0, 3).unwrap(), 22.0);
        assert_eq!(locf_predict(&ds, 2, 0, 4).unwrap(), 22.0);
        assert_eq!(locf_predict(&ds, 3, 0, 4).unwrap(), 9.0);
        assert!(matches!(
            locf_predict(&ds, 3, 0, 0),
            Err(Error::NoPriorObservation { .. })
        ));
    }

    #[test]
    fn matching_duplicate_and_degenerate() {
        let ds = dataset();
        let cfg = MatchingConfig {
            n_neighbors: 1,
            ..MatchingConfig::default()
        };
        // on (x, y1, y2, y3) patient 2 sits closer to p1's trajectory
        let t = TargetTuple::new(2, 4, 0);
        let nearest = matching_predict(&ds, t, &[0, 1], &cfg).unwrap();
        let all = matching_predict(&ds, t, &[0, 1], &MatchingConfig::default()).unwrap();
        assert_eq!(all, naive_predict(&ds, 4, 0, &[0, 1]).unwrap());
        assert_eq!(nearest, 10.0);
    }

    #[test]
    fn neighbors_tie_break_by_index() {
        let pool = Matrix::from_rows(&[[0.0], [2.0], [2.0], [0.0]]);
        assert_eq!(nearest_neighbors(&pool, &[1.0], 2), vec![0, 1]);
        assert_eq!(nearest_neighbors(&pool, &[1.0], 9), vec![0, 1, 2, 3]);
    }
}
