use alloc::string::String;

/// Errors raised by the estimator, the generators and dataset construction.
///
/// Row numbers are 1-based data-row positions as seen by whoever fed the
/// builder (the CSV readers in the companion crate pass file line numbers).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("row {row}: malformed row: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("row {row}: duplicate entry for patient {patient}, visit {visit}, arm {arm}")]
    DuplicateEntry {
        row: usize,
        patient: String,
        visit: usize,
        arm: String,
    },
    #[error("row {row}: patient {patient} observed under two arms at visit {visit} ({first} and {second})")]
    SutvaViolation {
        row: usize,
        patient: String,
        visit: usize,
        first: String,
        second: String,
    },
    #[error("row {row}: patient {patient} observed under arm {second} after being assigned to arm {first}")]
    ArmSwitch {
        row: usize,
        patient: String,
        first: String,
        second: String,
    },
    #[error("patient {patient}: dropout is not absorbing (visit {visit} observed after a missing visit)")]
    NonAbsorbingDropout { patient: String, visit: usize },
    #[error("row {row}: patient {patient} is not present in the covariate file")]
    UnknownPatient { row: usize, patient: String },
    #[error("row {row}: duplicate patient {patient} in covariate file")]
    DuplicatePatient { row: usize, patient: String },
    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("visit {visit} is not observed for patient {patient} in arm {arm}")]
    VisitNotObserved { patient: usize, visit: usize, arm: usize },
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("singular value decomposition did not converge after {sweeps} sweeps")]
    SvdNoConvergence { sweeps: usize },
    #[error("empty spectrum")]
    EmptySpectrum,
    #[error("zero matrix has no spectral energy profile")]
    ZeroMatrix,
    #[error("retained singular value {index} is {value:e}, below 1e-12 (rank overshoot)")]
    RankOvershoot { index: usize, value: f64 },
    #[error("empty donor set")]
    EmptyDonors,
    #[error("{what} has zero norm")]
    ZeroNorm { what: &'static str },
    #[error("feature vector is empty")]
    DegenerateFeatures,
    #[error("need at least {needed} estimates, got {got}")]
    TooFewEstimates { needed: usize, got: usize },
    #[error("patient {patient} has no observed outcome in arm {arm} before visit {visit}")]
    NoPriorObservation { patient: usize, arm: usize, visit: usize },
    #[error("empty input: {what}")]
    EmptyInput { what: &'static str },
    #[error("dropout quota {quota} at visit {visit} exceeds {active} active patients in arm {arm}")]
    QuotaExceeded {
        arm: usize,
        visit: usize,
        quota: usize,
        active: usize,
    },
    #[error("dropout quota at visit {visit} in arm {arm} not met after {passes} sampling passes")]
    QuotaNotMet { arm: usize, visit: usize, passes: usize },
    #[error("dataset already contains dropouts")]
    PreexistingDropouts,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("arm {arm} has {size} patients; at least {needed} required")]
    ArmTooSmall { arm: usize, size: usize, needed: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// True for failures of the numerical kernels rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite
                | Error::SvdNoConvergence { .. }
                | Error::ZeroMatrix
                | Error::RankOvershoot { .. }
                | Error::ZeroNorm { .. }
                | Error::QuotaNotMet { .. }
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;
