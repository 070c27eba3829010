//! Trial data model: a T×N×A outcome tensor observed under single arm
//! assignment and absorbing dropout, plus covariates.
//!
//! Visits are 0-based internally (`0..n_visits`); files and reports use
//! 1-based visit numbers, baseline values live in the covariates.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// One (patient, visit, arm) entry of the outcome tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TargetTuple {
    pub patient: usize,
    pub visit: usize,
    pub arm: usize,
}

impl TargetTuple {
    pub fn new(patient: usize, visit: usize, arm: usize) -> Self {
        TargetTuple { patient, visit, arm }
    }
}

/// Covariates followed by the outcomes at `visit_set`, in increasing visit order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub visit_set: Vec<usize>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Observation indicator Ω over the outcome tensor, derived from a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskTensor {
    n_visits: usize,
    n_patients: usize,
    n_arms: usize,
    entries: Vec<bool>,
}

impl MaskTensor {
    pub fn get(&self, patient: usize, visit: usize, arm: usize) -> bool {
        self.entries[(visit * self.n_patients + patient) * self.n_arms + arm]
    }

    pub fn count(&self) -> usize {
        self.entries.iter().filter(|&&b| b).count()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_visits, self.n_patients, self.n_arms)
    }
}

/// A single trial. Immutable once built; every constructor checks the
/// observation rule (present iff assigned arm and not yet dropped out),
/// absorbing dropout and single assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset {
    n_visits: usize,
    n_arms: usize,
    /// Indexed `(visit * N + patient) * A + arm`.
    outcomes: Vec<Option<f64>>,
    covariates: Matrix,
    arm_assignment: Vec<Option<usize>>,
    /// Number of leading observed visits per patient; dropout D_it = 1 iff t >= this.
    observed_through: Vec<usize>,
    patient_ids: Vec<String>,
    arm_labels: Vec<String>,
    covariate_labels: Vec<String>,
}

impl TrialDataset {
    /// Builds a dataset from a full assignment and per-patient trajectories.
    ///
    /// `trajectories[i]` holds the observed outcomes of patient `i` at
    /// visits `0..len` in their assigned arm; its length must not exceed
    /// `n_visits`, and must be zero when the patient has no arm.
    pub fn from_trajectories(
        patient_ids: Vec<String>,
        arm_labels: Vec<String>,
        covariate_labels: Vec<String>,
        covariates: Matrix,
        n_visits: usize,
        arm_assignment: Vec<Option<usize>>,
        trajectories: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = patient_ids.len();
        let n_arms = arm_labels.len();
        if covariates.rows() != n {
            return Err(Error::LengthMismatch {
                left: covariates.rows(),
                right: n,
            });
        }
        if covariate_labels.len() != covariates.cols() {
            return Err(Error::LengthMismatch {
                left: covariate_labels.len(),
                right: covariates.cols(),
            });
        }
        if arm_assignment.len() != n || trajectories.len() != n {
            return Err(Error::LengthMismatch {
                left: arm_assignment.len().min(trajectories.len()),
                right: n,
            });
        }
        if !covariates.is_finite() {
            return Err(Error::NonFinite);
        }
        let mut outcomes = vec![None; n_visits * n * n_arms];
        let mut observed_through = vec![0; n];
        for (i, traj) in trajectories.iter().enumerate() {
            if traj.len() > n_visits {
                return Err(Error::IndexOutOfRange {
                    what: "visit",
                    index: traj.len(),
                    size: n_visits,
                });
            }
            match arm_assignment[i] {
                Some(a) if a >= n_arms => {
                    return Err(Error::IndexOutOfRange {
                        what: "arm",
                        index: a,
                        size: n_arms,
                    })
                }
                Some(a) => {
                    for (t, &y) in traj.iter().enumerate() {
                        if !y.is_finite() {
                            return Err(Error::NonFinite);
                        }
                        outcomes[(t * n + i) * n_arms + a] = Some(y);
                    }
                }
                None if !traj.is_empty() => {
                    return Err(Error::InvalidConfig(
                        "outcomes given for a patient without an arm".to_string(),
                    ))
                }
                None => {}
            }
            observed_through[i] = traj.len();
        }
        Ok(TrialDataset {
            n_visits,
            n_arms,
            outcomes,
            covariates,
            arm_assignment,
            observed_through,
            patient_ids,
            arm_labels,
            covariate_labels,
        })
    }

    #[inline]
    fn idx(&self, patient: usize, visit: usize, arm: usize) -> usize {
        (visit * self.n_patients() + patient) * self.n_arms + arm
    }

    pub fn n_patients(&self) -> usize {
        self.patient_ids.len()
    }

    pub fn n_visits(&self) -> usize {
        self.n_visits
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.cols()
    }

    pub fn covariates(&self) -> &Matrix {
        &self.covariates
    }

    pub fn covariate_row(&self, patient: usize) -> &[f64] {
        self.covariates.row(patient)
    }

    pub fn patient_ids(&self) -> &[String] {
        &self.patient_ids
    }

    pub fn arm_labels(&self) -> &[String] {
        &self.arm_labels
    }

    pub fn covariate_labels(&self) -> &[String] {
        &self.covariate_labels
    }

    pub fn arm_of(&self, patient: usize) -> Option<usize> {
        self.arm_assignment[patient]
    }

    pub fn arm_assignment(&self) -> &[Option<usize>] {
        &self.arm_assignment
    }

    /// Number of leading visits observed for the patient (0 = never observed).
    pub fn observed_through(&self, patient: usize) -> usize {
        self.observed_through[patient]
    }

    /// D_it: true when the patient has withdrawn at or before `visit`.
    pub fn dropped(&self, patient: usize, visit: usize) -> bool {
        visit >= self.observed_through[patient]
    }

    /// True when the patient was observed at every visit.
    pub fn is_complier(&self, patient: usize) -> bool {
        self.observed_through[patient] == self.n_visits
    }

    pub fn outcome(&self, patient: usize, visit: usize, arm: usize) -> Option<f64> {
        self.outcomes[self.idx(patient, visit, arm)]
    }

    /// Outcome at a visit the caller knows is observed.
    pub(crate) fn observed(&self, patient: usize, visit: usize, arm: usize) -> f64 {
        self.outcome(patient, visit, arm)
            .expect("outcome observed by construction")
    }

    pub fn is_observed(&self, patient: usize, visit: usize, arm: usize) -> bool {
        self.outcome(patient, visit, arm).is_some()
    }

    /// Observed outcomes of the patient in their own arm, visit-ordered.
    pub fn trajectory(&self, patient: usize) -> Vec<f64> {
        match self.arm_assignment[patient] {
            Some(a) => (0..self.observed_through[patient])
                .map(|t| self.observed(patient, t, a))
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn mask(&self) -> MaskTensor {
        MaskTensor {
            n_visits: self.n_visits,
            n_patients: self.n_patients(),
            n_arms: self.n_arms,
            entries: self.outcomes.iter().map(Option::is_some).collect(),
        }
    }

    /// Patients assigned to `arm`, in index order.
    pub fn arm_members(&self, arm: usize) -> Vec<usize> {
        (0..self.n_patients())
            .filter(|&i| self.arm_assignment[i] == Some(arm))
            .collect()
    }

    /// Patients of the arm that stayed through every visit.
    pub fn compliers(&self, arm: usize) -> Vec<usize> {
        (0..self.n_patients())
            .filter(|&i| self.arm_assignment[i] == Some(arm) && self.is_complier(i))
            .collect()
    }

    /// Same patients, covariates and assignment, with observation truncated
    /// to `observed_through[i]` leading visits.
    pub fn with_truncation(&self, observed_through: &[usize]) -> Result<TrialDataset> {
        if observed_through.len() != self.n_patients() {
            return Err(Error::LengthMismatch {
                left: observed_through.len(),
                right: self.n_patients(),
            });
        }
        let trajectories = (0..self.n_patients())
            .map(|i| {
                let mut traj = self.trajectory(i);
                traj.truncate(observed_through[i]);
                traj
            })
            .collect();
        TrialDataset::from_trajectories(
            self.patient_ids.clone(),
            self.arm_labels.clone(),
            self.covariate_labels.clone(),
            self.covariates.clone(),
            self.n_visits,
            self.arm_assignment.clone(),
            trajectories,
        )
    }

    /// Same dataset with the outcome values replaced by `f(patient, visit, arm, y)`.
    pub fn map_outcomes<F>(&self, mut f: F) -> Result<TrialDataset>
    where
        F: FnMut(usize, usize, usize, f64) -> f64,
    {
        let trajectories = (0..self.n_patients())
            .map(|i| match self.arm_assignment[i] {
                Some(a) => self
                    .trajectory(i)
                    .into_iter()
                    .enumerate()
                    .map(|(t, y)| f(i, t, a, y))
                    .collect(),
                None => Vec::new(),
            })
            .collect();
        TrialDataset::from_trajectories(
            self.patient_ids.clone(),
            self.arm_labels.clone(),
            self.covariate_labels.clone(),
            self.covariates.clone(),
            self.n_visits,
            self.arm_assignment.clone(),
            trajectories,
        )
    }

    /// Long-format records `(patient, visit, arm, value)` in patient-then-visit order.
    pub fn records(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        (0..self.n_patients()).flat_map(move |i| {
            let arm = self.arm_assignment[i];
            (0..self.observed_through[i]).map(move |t| {
                let a = arm.expect("observed patient has an arm");
                (i, t, a, self.observed(i, t, a))
            })
        })
    }

    pub fn check_target(&self, target: TargetTuple) -> Result<()> {
        check_index("patient", target.patient, self.n_patients())?;
        check_index("visit", target.visit, self.n_visits)?;
        check_index("arm", target.arm, self.n_arms)
    }
}

fn check_index(what: &'static str, index: usize, size: usize) -> Result<()> {
    if index < size {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { what, index, size })
    }
}

/// P = {j : Ω_jta = 1}: patients of `arm` still observed at `visit`.
pub fn donor_set(dataset: &TrialDataset, visit: usize, arm: usize) -> Vec<usize> {
    (0..dataset.n_patients())
        .filter(|&j| dataset.is_observed(j, visit, arm))
        .collect()
}

/// T = {τ < before : Ω_iτa = 1}. Empty when the patient is in another arm.
pub fn observed_visits(dataset: &TrialDataset, patient: usize, arm: usize, before: usize) -> Vec<usize> {
    if dataset.arm_of(patient) != Some(arm) {
        return Vec::new();
    }
    (0..before.min(dataset.observed_through(patient))).collect()
}

/// Z_iT = [X_i, Y_iT].
pub fn feature_vector(
    dataset: &TrialDataset,
    patient: usize,
    visit_set: &[usize],
    arm: usize,
) -> Result<FeatureVector> {
    let mut values = Vec::with_capacity(dataset.n_covariates() + visit_set.len());
    values.extend_from_slice(dataset.covariate_row(patient));
    let mut visits = visit_set.to_vec();
    visits.sort_unstable();
    visits.dedup();
    for &t in &visits {
        match dataset.outcome(patient, t, arm) {
            Some(y) => values.push(y),
            None => return Err(Error::VisitNotObserved { patient, visit: t, arm }),
        }
    }
    Ok(FeatureVector {
        values,
        visit_set: visits,
    })
}

/// Row-wise stack of feature vectors for `patients` over a common visit set.
pub fn feature_matrix(dataset: &TrialDataset, patients: &[usize], visit_set: &[usize], arm: usize) -> Result<Matrix> {
    let width = dataset.n_covariates() + visit_set.len();
    let mut data = Vec::with_capacity(patients.len() * width);
    for &j in patients {
        data.extend(feature_vector(dataset, j, visit_set, arm)?.values);
    }
    Ok(Matrix::from_row_major(patients.len(), width, data))
}

/// Incremental construction from long-format outcome rows.
///
/// The patient universe and order come from the covariate table; arms are
/// interned in first-seen order; arm assignment and dropout are
/// reconstructed from which rows are present.
#[derive(Debug)]
pub struct DatasetBuilder {
    patient_ids: Vec<String>,
    patient_index: BTreeMap<String, usize>,
    covariate_labels: Vec<String>,
    covariates: Vec<Vec<f64>>,
    arm_labels: Vec<String>,
    arm_index: BTreeMap<String, usize>,
    entries: BTreeMap<(usize, usize), (usize, f64, usize)>,
    assignment: Vec<Option<(usize, usize)>>,
}

impl DatasetBuilder {
    pub fn new(covariate_labels: Vec<String>) -> Self {
        DatasetBuilder {
            patient_ids: Vec::new(),
            patient_index: BTreeMap::new(),
            covariate_labels,
            covariates: Vec::new(),
            arm_labels: Vec::new(),
            arm_index: BTreeMap::new(),
            entries: BTreeMap::new(),
            assignment: Vec::new(),
        }
    }

    /// Pre-registers arm labels so that their indices are fixed.
    pub fn with_arms<I: IntoIterator<Item = String>>(mut self, labels: I) -> Self {
        for l in labels {
            self.intern_arm(l);
        }
        self
    }

    fn intern_arm(&mut self, label: String) -> usize {
        if let Some(&a) = self.arm_index.get(&label) {
            return a;
        }
        let a = self.arm_labels.len();
        self.arm_index.insert(label.clone(), a);
        self.arm_labels.push(label);
        a
    }

    pub fn add_patient(&mut self, row: usize, id: &str, covariates: Vec<f64>) -> Result<()> {
        if covariates.len() != self.covariate_labels.len() {
            return Err(Error::MalformedRow {
                row,
                reason: alloc::format!(
                    "expected {} covariates, found {}",
                    self.covariate_labels.len(),
                    covariates.len()
                ),
            });
        }
        if covariates.iter().any(|v| !v.is_finite()) {
            return Err(Error::MalformedRow {
                row,
                reason: "non-finite covariate".to_string(),
            });
        }
        if self.patient_index.contains_key(id) {
            return Err(Error::DuplicatePatient {
                row,
                patient: id.to_string(),
            });
        }
        self.patient_index.insert(id.to_string(), self.patient_ids.len());
        self.patient_ids.push(id.to_string());
        self.covariates.push(covariates);
        self.assignment.push(None);
        Ok(())
    }

    /// Adds one observed outcome; `visit` is 1-based as in files.
    pub fn add_outcome(
        &mut self,
        row: usize,
        patient_id: &str,
        visit: usize,
        arm_label: &str,
        value: f64,
    ) -> Result<()> {
        if visit == 0 {
            return Err(Error::MalformedRow {
                row,
                reason: "visits are numbered from 1".to_string(),
            });
        }
        if !value.is_finite() {
            return Err(Error::MalformedRow {
                row,
                reason: "non-finite value".to_string(),
            });
        }
        let i = *self
            .patient_index
            .get(patient_id)
            .ok_or_else(|| Error::UnknownPatient {
                row,
                patient: patient_id.to_string(),
            })?;
        let a = self.intern_arm(arm_label.to_string());
        let t = visit - 1;
        if let Some(&(prev_arm, _, _)) = self.entries.get(&(i, t)) {
            return Err(if prev_arm == a {
                Error::DuplicateEntry {
                    row,
                    patient: patient_id.to_string(),
                    visit,
                    arm: arm_label.to_string(),
                }
            } else {
                Error::SutvaViolation {
                    row,
                    patient: patient_id.to_string(),
                    visit,
                    first: self.arm_labels[prev_arm].clone(),
                    second: arm_label.to_string(),
                }
            });
        }
        match self.assignment[i] {
            Some((assigned, _)) if assigned != a => {
                return Err(Error::ArmSwitch {
                    row,
                    patient: patient_id.to_string(),
                    first: self.arm_labels[assigned].clone(),
                    second: arm_label.to_string(),
                })
            }
            Some(_) => {}
            None => self.assignment[i] = Some((a, row)),
        }
        self.entries.insert((i, t), (a, value, row));
        Ok(())
    }

    /// Finishes the dataset. The visit count is the largest visit seen unless
    /// `n_visits` is given.
    pub fn finish(self, n_visits: Option<usize>) -> Result<TrialDataset> {
        let max_visit = self.entries.keys().map(|&(_, t)| t + 1).max().unwrap_or(0);
        let n_visits = match n_visits {
            Some(v) if v < max_visit => {
                return Err(Error::IndexOutOfRange {
                    what: "visit",
                    index: max_visit,
                    size: v,
                })
            }
            Some(v) => v,
            None => max_visit,
        };
        let n = self.patient_ids.len();
        let mut trajectories: Vec<Vec<f64>> = vec![Vec::new(); n];
        for (&(i, t), &(_, value, _)) in &self.entries {
            let traj = &mut trajectories[i];
            if traj.len() != t {
                return Err(Error::NonAbsorbingDropout {
                    patient: self.patient_ids[i].clone(),
                    visit: t + 1,
                });
            }
            traj.push(value);
        }
        let assignment = self.assignment.iter().map(|a| a.map(|(a, _)| a)).collect();
        let covariates = Matrix::from_row_major(
            n,
            self.covariate_labels.len(),
            self.covariates.into_iter().flatten().collect(),
        );
        TrialDataset::from_trajectories(
            self.patient_ids,
            self.arm_labels,
            self.covariate_labels,
            covariates,
            n_visits,
            assignment,
            trajectories,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn build(rows: &[(&str, usize, &str, f64)]) -> Result<TrialDataset> {
        let mut b = DatasetBuilder::new(vec!["age".into(), "sex".into()]);
        b.add_patient(1, "p1", vec![70.0, 1.0]).unwrap();
        b.add_patient(2, "p2", vec![65.0, 0.0]).unwrap();
        for (r, &(p, v, a, y)) in rows.iter().enumerate() {
            b.add_outcome(r + 1, p, v, a, y)?;
        }
        b.finish(Some(5))
    }

    #[test]
    fn fully_observed_patient() {
        let rows: Vec<_> = (1..=5).map(|v| ("p1", v, "A", v as f64)).collect();
        let ds = build(&rows).unwrap();
        assert_eq!(ds.arm_of(0), Some(0));
        assert!((0..5).all(|t| !ds.dropped(0, t)));
        // patient without outcome rows is retained as all-missing
        assert_eq!(ds.arm_of(1), None);
        assert!((0..5).all(|t| ds.dropped(1, t)));
    }

    #[test]
    fn absorbing_tail() {
        let rows: Vec<_> = (1..=3).map(|v| ("p1", v, "A", 1.0)).collect();
        let ds = build(&rows).unwrap();
        assert!(!ds.dropped(0, 2));
        assert!(ds.dropped(0, 3) && ds.dropped(0, 4));
    }

    #[test]
    fn sutva_violation_rejected() {
        let err = build(&[("p1", 2, "A", 1.0), ("p1", 2, "B", 2.0)]).unwrap_err();
        assert!(matches!(err, Error::SutvaViolation { row: 2, visit: 2, .. }));
    }

    #[test]
    fn duplicate_and_gap_rejected() {
        let err = build(&[("p1", 1, "A", 1.0), ("p1", 1, "A", 2.0)]).unwrap_err();
        assert!(matches!(err, Error::DuplicateEntry { row: 2, .. }));
        let err = build(&[("p1", 1, "A", 1.0), ("p1", 3, "A", 2.0)]).unwrap_err();
        assert!(matches!(err, Error::NonAbsorbingDropout { visit: 3, .. }));
        let err = build(&[("p1", 2, "A", 1.0)]).unwrap_err();
        assert!(matches!(err, Error::NonAbsorbingDropout { visit: 2, .. }));
        let err = build(&[("p1", 1, "A", 1.0), ("p1", 2, "B", 2.0)]).unwrap_err();
        assert!(matches!(err, Error::ArmSwitch { .. }));
        let err = build(&[("p9", 1, "A", 1.0)]).unwrap_err();
        assert!(format!("{err}").contains("p9"));
    }

    #[test]
    fn donor_sets_and_visits() {
        let mut rows: Vec<_> = (1..=5).map(|v| ("p1", v, "A", v as f64)).collect();
        rows.extend((1..=3).map(|v| ("p2", v, "A", 10.0 * v as f64)));
        let ds = build(&rows).unwrap();
        assert_eq!(donor_set(&ds, 4, 0), vec![0]);
        assert_eq!(donor_set(&ds, 2, 0), vec![0, 1]);
        assert_eq!(observed_visits(&ds, 1, 0, 4), vec![0, 1, 2]);
        assert_eq!(observed_visits(&ds, 1, 0, 0), Vec::<usize>::new());
        // arm with no patients
        let ds2 = build(&rows).unwrap();
        assert!(donor_set(&ds2, 0, 0).len() == 2);
    }

    #[test]
    fn feature_vector_concatenates() {
        let rows: Vec<_> = (1..=5).map(|v| ("p1", v, "A", 20.0 * v as f64)).collect();
        let ds = build(&rows).unwrap();
        let z = feature_vector(&ds, 0, &[0], 0).unwrap();
        assert_eq!(z.values, vec![70.0, 1.0, 20.0]);
        let z = feature_vector(&ds, 0, &[], 0).unwrap();
        assert_eq!(z.values, ds.covariate_row(0).to_vec());
        let err = feature_vector(&ds, 1, &[0], 0).unwrap_err();
        assert!(matches!(err, Error::VisitNotObserved { .. }));
    }
}
