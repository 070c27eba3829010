use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use snn_core::dgp::{MissingnessMechanism, NoiseLevel};
use snn_core::eval::{Estimator, Study};
use snn_core::spectra::RankMode;

use crate::commands;
use crate::config::{CliConfig, OutputFormat, TargetSelection};
use crate::error::Result;
use crate::output::{write_all, OutputFile};

#[derive(Debug, Parser)]
#[command(
    name = "snn",
    version,
    about = "Synthetic nearest neighbors for clinical trial outcome tensors"
)]
pub struct Cli {
    /// TOML configuration; flags given on the command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Format of tabular outputs other than datasets and reports.
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic trial with its noiseless ground truth.
    Simulate {
        #[command(flatten)]
        generator: GeneratorArgs,
    },
    /// Impose monotone dropout on a complete dataset.
    DropoutSim {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_parser = parse_mechanism)]
        mechanism: Option<MissingnessMechanism>,
        /// Covariate holding the baseline measurement.
        #[arg(long)]
        baseline_covariate: Option<String>,
    },
    /// Predict unobserved entries of a dataset.
    Impute {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        snn: SnnArgs,
        #[arg(long, value_parser = parse_estimator)]
        estimator: Option<Estimator>,
        #[arg(long, value_enum)]
        targets: Option<TargetSelection>,
        /// Also write full trajectories of imputed patients.
        #[arg(long)]
        trajectories: bool,
    },
    /// Run the held-out arm study.
    SyntheticRct {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        generator: GeneratorArgs,
        #[command(flatten)]
        snn: SnnArgs,
        #[command(flatten)]
        study: StudyArgs,
    },
    /// Cumulative spectral energy of each arm's complier matrix.
    Spectrum {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        generator: GeneratorArgs,
        /// Number of leading singular values.
        #[arg(long)]
        top: Option<usize>,
    },
    /// Run the configured studies and summarize estimator accuracy.
    Evaluate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        generator: GeneratorArgs,
        #[command(flatten)]
        snn: SnnArgs,
        #[command(flatten)]
        study: StudyArgs,
        #[arg(long, value_delimiter = ',', value_parser = parse_mechanism)]
        mechanisms: Option<Vec<MissingnessMechanism>>,
        #[arg(long, value_delimiter = ',', value_parser = parse_study)]
        studies: Option<Vec<Study>>,
    },
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub outcomes: Option<PathBuf>,
    #[arg(long)]
    pub covariates: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GeneratorArgs {
    #[arg(long)]
    pub patients: Option<usize>,
    #[arg(long)]
    pub visits: Option<usize>,
    #[arg(long)]
    pub arms: Option<usize>,
    #[arg(long)]
    pub n_covariates: Option<usize>,
    /// Latent rank of the generated trial.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Outcome noise as a fraction of the signal RMS.
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SnnArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub subgroups: Option<usize>,
    /// `universal`, `fixed:<b>` or `energy:<fraction>`.
    #[arg(long, value_parser = parse_rank_mode)]
    pub rank_mode: Option<RankMode>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long, value_delimiter = ',', value_parser = parse_estimator)]
    pub estimators: Option<Vec<Estimator>>,
}

fn parse_mechanism(s: &str) -> std::result::Result<MissingnessMechanism, String> {
    MissingnessMechanism::parse(s).ok_or_else(|| format!("unknown mechanism {s:?} (mcar, mar, mnar)"))
}

fn parse_estimator(s: &str) -> std::result::Result<Estimator, String> {
    Estimator::parse(s).ok_or_else(|| format!("unknown estimator {s:?} (snn, naive, locf, matching)"))
}

fn parse_study(s: &str) -> std::result::Result<Study, String> {
    match s.trim() {
        "dropout" => Ok(Study::Dropout),
        "synthetic-rct" => Ok(Study::SyntheticRct),
        _ => Err(format!("unknown study {s:?} (dropout, synthetic-rct)")),
    }
}

fn parse_rank_mode(s: &str) -> std::result::Result<RankMode, String> {
    let s = s.trim();
    if s == "universal" {
        return Ok(RankMode::Universal);
    }
    let bad = || format!("invalid rank mode {s:?}");
    match s.split_once(':') {
        Some(("fixed", b)) => b.parse().map(RankMode::Fixed).map_err(|_| bad()),
        Some(("energy", f)) => f.parse().map(RankMode::Energy).map_err(|_| bad()),
        _ => Err(bad()),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl InputArgs {
    fn apply(self, cfg: &mut CliConfig) {
        if self.outcomes.is_some() {
            cfg.input.outcomes = self.outcomes;
        }
        if self.covariates.is_some() {
            cfg.input.covariates = self.covariates;
        }
    }
}

impl GeneratorArgs {
    fn apply(self, cfg: &mut CliConfig) {
        let g = &mut cfg.generator;
        set(&mut g.n_patients, self.patients);
        set(&mut g.n_visits, self.visits);
        set(&mut g.n_arms, self.arms);
        set(&mut g.n_covariates, self.n_covariates);
        set(&mut g.rank, self.rank);
        set(&mut g.outcome_noise, self.noise.map(NoiseLevel::RelativeToSignal));
    }
}

impl SnnArgs {
    fn apply(self, cfg: &mut CliConfig) {
        set(&mut cfg.snn.alpha, self.alpha);
        set(&mut cfg.snn.n_subgroups, self.subgroups);
        set(&mut cfg.snn.rank_mode, self.rank_mode);
    }
}

impl StudyArgs {
    fn apply(self, cfg: &mut CliConfig) {
        set(&mut cfg.study.n_repeats, self.repeats);
        set(&mut cfg.study.estimators, self.estimators);
    }
}

impl Cli {
    /// The configuration file (or defaults) with command-line overrides.
    pub fn effective_config(&self) -> Result<CliConfig> {
        let mut cfg = match &self.config {
            Some(path) => CliConfig::load(path)?,
            None => CliConfig::default(),
        };
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.format, self.format);
        Ok(cfg)
    }

    /// Renders every output of the chosen command, then writes them.
    pub fn run(self) -> Result<Vec<PathBuf>> {
        let mut cfg = self.effective_config()?;
        let files: Vec<OutputFile> = match self.command {
            Command::Simulate { generator } => {
                generator.apply(&mut cfg);
                commands::simulate(&cfg)?
            }
            Command::DropoutSim {
                input,
                mechanism,
                baseline_covariate,
            } => {
                input.apply(&mut cfg);
                set(&mut cfg.dropout.mechanism, mechanism);
                set(&mut cfg.dropout.baseline_covariate, baseline_covariate);
                commands::dropout_sim(&cfg)?
            }
            Command::Impute {
                input,
                snn,
                estimator,
                targets,
                trajectories,
            } => {
                input.apply(&mut cfg);
                snn.apply(&mut cfg);
                set(&mut cfg.impute.estimator, estimator);
                set(&mut cfg.impute.targets, targets);
                cfg.impute.trajectories |= trajectories;
                commands::impute(&cfg)?
            }
            Command::SyntheticRct {
                input,
                generator,
                snn,
                study,
            } => {
                input.apply(&mut cfg);
                generator.apply(&mut cfg);
                snn.apply(&mut cfg);
                study.apply(&mut cfg);
                commands::synthetic_rct(&cfg)?
            }
            Command::Spectrum { input, generator, top } => {
                input.apply(&mut cfg);
                generator.apply(&mut cfg);
                set(&mut cfg.spectrum.top, top);
                commands::spectrum(&cfg)?
            }
            Command::Evaluate {
                input,
                generator,
                snn,
                study,
                mechanisms,
                studies,
            } => {
                input.apply(&mut cfg);
                generator.apply(&mut cfg);
                snn.apply(&mut cfg);
                study.apply(&mut cfg);
                set(&mut cfg.study.mechanisms, mechanisms);
                set(&mut cfg.study.studies, studies);
                commands::evaluate(&cfg)?
            }
        };
        write_all(&self.out, &files)
    }
}
