//! Synthetic nearest neighbors (SNN) for partially observed
//! patient × visit × arm outcome tensors.
//!
//! The crate is `no_std` and needs only `alloc`. It covers the trial data
//! model ([`tensor`]), the spectral kernel ([`spectra`]), the estimator
//! ([`snn`]), comparison baselines ([`baselines`]), synthetic trials and
//! dropout simulation ([`dgp`]), and the evaluation studies ([`eval`]).
//! File formats and the command-line tool live in the `snn` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod baselines;
pub mod dgp;
mod error;
pub mod eval;
pub mod linalg;
pub mod snn;
pub mod spectra;
pub mod tensor;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use snn::{predict, SnnConfig, SnnPrediction};
pub use tensor::{TargetTuple, TrialDataset};
