//! TOML configuration shared by every subcommand.
//!
//! A config file may set any subset of the sections below; missing keys take
//! their defaults and unknown keys are rejected. Command-line flags are
//! applied on top, and the resulting effective configuration is echoed into
//! each run's manifest.
//!
//! ```toml
//! seed = 7
//! format = "csv"
//!
//! [input]
//! outcomes = "data/outcomes.csv"
//! covariates = "data/covariates.csv"
//!
//! [generator]
//! n_patients = 300
//! outcome_noise = { relative_to_signal = 0.1 }
//!
//! [snn]
//! alpha = 0.2
//! rank_mode = { fixed = 2 }
//!
//! [study]
//! n_repeats = 10
//! mechanisms = ["mcar", "mar", "mnar"]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use snn_core::baselines::MatchingConfig;
use snn_core::dgp::{DropoutRateSchedule, GeneratorConfig, MissingnessMechanism, DEFAULT_BASELINE_LABEL};
use snn_core::eval::{Estimator, EvalVisits, Study, StudyConfig};
use snn_core::SnnConfig;

use crate::error::{CliError, ErrorKind, Result};

/// Version tag written into manifests and JSON reports.
pub const SCHEMA_VERSION: &str = "snn-output/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputPaths {
    pub outcomes: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
}

/// Which entries `impute` predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TargetSelection {
    /// Missing visits of each patient's own arm.
    #[default]
    Dropouts,
    /// Every visit under every arm the patient was not assigned to.
    Counterfactual,
    /// Both of the above.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub studies: Vec<Study>,
    pub n_repeats: usize,
    pub mechanisms: Vec<MissingnessMechanism>,
    pub estimators: Vec<Estimator>,
    pub eval_visit: Option<usize>,
    pub eval_visits: EvalVisits,
    pub baseline_covariate: String,
}

impl Default for StudySection {
    fn default() -> Self {
        StudySection {
            studies: vec![Study::Dropout, Study::SyntheticRct],
            n_repeats: 10,
            mechanisms: MissingnessMechanism::ALL.to_vec(),
            estimators: Estimator::ALL.to_vec(),
            eval_visit: None,
            eval_visits: EvalVisits::Final,
            baseline_covariate: DEFAULT_BASELINE_LABEL.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DropoutSection {
    pub mechanism: MissingnessMechanism,
    pub baseline_covariate: String,
}

impl Default for DropoutSection {
    fn default() -> Self {
        DropoutSection {
            mechanism: MissingnessMechanism::Mcar,
            baseline_covariate: DEFAULT_BASELINE_LABEL.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputeSection {
    pub estimator: Estimator,
    pub targets: TargetSelection,
    /// Also write per-patient trajectories.
    pub trajectories: bool,
}

impl Default for ImputeSection {
    fn default() -> Self {
        ImputeSection {
            estimator: Estimator::Snn,
            targets: TargetSelection::Dropouts,
            trajectories: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub top: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection { top: 9 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    /// Master seed; overrides `snn.seed`.
    pub seed: u64,
    pub format: OutputFormat,
    pub input: InputPaths,
    pub generator: GeneratorConfig,
    pub snn: SnnConfig,
    pub matching: MatchingConfig,
    pub schedule: DropoutRateSchedule,
    pub study: StudySection,
    pub dropout: DropoutSection,
    pub impute: ImputeSection,
    pub spectrum: SpectrumSection,
}

impl CliConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::validation(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| e.in_file(path))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::new(ErrorKind::Io, e.to_string()))
    }

    /// SNN settings with the master seed applied.
    pub fn snn_config(&self) -> SnnConfig {
        SnnConfig {
            seed: self.seed,
            ..self.snn.clone()
        }
    }

    pub fn study_config(&self) -> StudyConfig {
        StudyConfig {
            n_repeats: self.study.n_repeats,
            mechanisms: self.study.mechanisms.clone(),
            estimators: self.study.estimators.clone(),
            snn: self.snn_config(),
            matching: self.matching,
            schedule: self.schedule.clone(),
            eval_visit: self.study.eval_visit,
            eval_visits: self.study.eval_visits,
            baseline_covariate: self.study.baseline_covariate.clone(),
            seed: self.seed,
        }
    }

    /// Input paths, or `None` when neither is set (generate instead).
    pub fn dataset_paths(&self) -> Result<Option<(&Path, &Path)>> {
        match (&self.input.outcomes, &self.input.covariates) {
            (Some(o), Some(c)) => Ok(Some((o.as_path(), c.as_path()))),
            (None, None) => Ok(None),
            _ => Err(CliError::validation("outcomes and covariates must be given together")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use snn_core::spectra::RankMode;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(CliConfig::from_toml("").unwrap(), CliConfig::default());
    }

    #[test]
    fn nested_sections_parse() {
        let cfg = CliConfig::from_toml(
            r#"
            seed = 7
            format = "json"
            [snn]
            rank_mode = { fixed = 2 }
            alpha = 0.3
            [generator]
            outcome_noise = { absolute = 0.5 }
            [study]
            mechanisms = ["mnar"]
            studies = ["synthetic-rct"]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.format, OutputFormat::Json);
        assert_eq!(cfg.snn.rank_mode, RankMode::Fixed(2));
        assert_eq!(cfg.study.mechanisms, vec![MissingnessMechanism::Mnar]);
        assert_eq!(cfg.snn_config().seed, 7);
        assert_eq!(cfg.study_config().snn.alpha, 0.3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            "sede = 1",
            "[snn]\nalhpa = 0.2",
            "[bogus]\nx = 1",
            "[generator]\nrank = 2\nranks = 3",
        ] {
            let err = CliConfig::from_toml(text).unwrap_err();
            assert_eq!(err.kind, ErrorKind::Validation, "{text}");
        }
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = CliConfig::default();
        cfg.snn.rank_mode = RankMode::Energy(0.95);
        cfg.input.outcomes = Some("a.csv".into());
        let text = cfg.to_toml().unwrap();
        assert_eq!(CliConfig::from_toml(&text).unwrap(), cfg);
    }
}
