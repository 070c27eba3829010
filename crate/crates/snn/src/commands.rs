//! Subcommand bodies. Each returns its rendered outputs without touching
//! the filesystem beyond reading inputs.

use std::collections::BTreeMap;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use snn_core::dgp::{generate_trial, simulate_dropouts, GeneratedTrial, LatentFactorModel};
use snn_core::eval::{Estimator, Study, StudyReport};
use snn_core::linalg::Matrix;
use snn_core::spectra::{spectral_energy_profile, standardize_columns};
use snn_core::TrialDataset;

use crate::config::{CliConfig, TargetSelection, SCHEMA_VERSION};
use crate::error::{CliError, Result};
use crate::io::{dataset_csv, dropouts_table, ground_truth_csv, json_bytes, read_dataset, table};
use crate::output::{with_manifest, OutputFile};
use crate::runner;

pub fn generate(config: &CliConfig) -> Result<GeneratedTrial> {
    config.generator.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model = LatentFactorModel::sample(&config.generator, &mut rng)?;
    Ok(generate_trial(&model, &mut rng)?)
}

fn load_required(config: &CliConfig, command: &str) -> Result<TrialDataset> {
    match config.dataset_paths()? {
        Some((o, c)) => read_dataset(o, c),
        None => Err(CliError::validation(format!(
            "{command} needs an input dataset (--outcomes and --covariates)"
        ))),
    }
}

/// The configured input dataset, or a generated trial when none is given.
fn load_or_generate(config: &CliConfig) -> Result<TrialDataset> {
    match config.dataset_paths()? {
        Some((o, c)) => read_dataset(o, c),
        None => Ok(generate(config)?.dataset),
    }
}

pub fn simulate(config: &CliConfig) -> Result<Vec<OutputFile>> {
    let trial = generate(config)?;
    let (outcomes, covariates) = dataset_csv(&trial.dataset)?;
    let truth = ground_truth_csv(&trial.ground_truth, &trial.dataset)?;
    let files = vec![
        OutputFile::new("outcomes.csv", outcomes),
        OutputFile::new("covariates.csv", covariates),
        OutputFile::new("ground_truth.csv", truth),
    ];
    with_manifest("simulate", config, trial.dataset.arm_labels(), files)
}

fn covariate_column(ds: &TrialDataset, label: &str) -> Result<usize> {
    ds.covariate_labels()
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| CliError::validation(format!("no covariate named {label}")))
}

pub fn dropout_sim(config: &CliConfig) -> Result<Vec<OutputFile>> {
    let ds = load_required(config, "dropout-sim")?;
    let baseline = covariate_column(&ds, &config.dropout.baseline_covariate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (masked, records) = simulate_dropouts(&ds, config.dropout.mechanism, &config.schedule, baseline, &mut rng)?;
    let (outcomes, covariates) = dataset_csv(&masked)?;
    let ext = config.format.extension();
    let files = vec![
        OutputFile::new("outcomes.csv", outcomes),
        OutputFile::new("covariates.csv", covariates),
        OutputFile::new(
            format!("dropouts.{ext}"),
            dropouts_table(&records, &masked, config.format)?,
        ),
    ];
    with_manifest("dropout-sim", config, masked.arm_labels(), files)
}

#[derive(Serialize)]
struct PredictionRow<'a> {
    patient_id: &'a str,
    visit: usize,
    arm: &'a str,
    estimate: f64,
    lower: Option<f64>,
    upper: Option<f64>,
    interval_kind: &'static str,
    passed: Option<bool>,
    theta_max: Option<f64>,
    phi_max: Option<f64>,
    n_retained: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimator: Option<&'static str>,
}

const PREDICTION_HEADER: [&str; 11] = [
    "patient_id",
    "visit",
    "arm",
    "estimate",
    "lower",
    "upper",
    "interval_kind",
    "passed",
    "theta_max",
    "phi_max",
    "n_retained",
];

#[derive(Serialize)]
struct TrajectoryRow<'a> {
    patient_id: &'a str,
    visit: usize,
    observed: Option<f64>,
    predicted: Option<f64>,
    lower: Option<f64>,
    upper: Option<f64>,
}

const TRAJECTORY_HEADER: [&str; 6] = ["patient_id", "visit", "observed", "predicted", "lower", "upper"];

pub fn impute(config: &CliConfig) -> Result<Vec<OutputFile>> {
    let ds = load_required(config, "impute")?;
    let estimator = config.impute.estimator;
    if estimator == Estimator::Locf && config.impute.targets != TargetSelection::Dropouts {
        return Err(CliError::validation(
            "locf only imputes a patient's own arm; use --targets dropouts",
        ));
    }
    let targets = runner::select_targets(&ds, config.impute.targets);
    let results = runner::impute(&ds, &targets, estimator, &config.snn_config(), &config.matching)?;

    let rows: Vec<PredictionRow> = results
        .iter()
        .map(|r| {
            let t = r.target;
            let interval = r.snn.as_ref().and_then(|p| p.interval);
            PredictionRow {
                patient_id: &ds.patient_ids()[t.patient],
                visit: t.visit + 1,
                arm: &ds.arm_labels()[t.arm],
                estimate: r.estimate,
                lower: interval.map(|iv| iv.0),
                upper: interval.map(|iv| iv.1),
                interval_kind: r.snn.as_ref().map_or("none", |p| p.interval_kind.as_str()),
                passed: r.snn.as_ref().map(|p| p.passed),
                theta_max: r.snn.as_ref().map(|p| p.theta_max()),
                phi_max: r.snn.as_ref().map(|p| p.phi_max()),
                n_retained: r.snn.as_ref().map(|p| p.retained.len()),
                estimator: (estimator != Estimator::Snn).then(|| estimator.as_str()),
            }
        })
        .collect();
    let mut header = PREDICTION_HEADER.to_vec();
    if estimator != Estimator::Snn {
        header.push("estimator");
    }
    let ext = config.format.extension();
    let mut files = vec![OutputFile::new(
        format!("predictions.{ext}"),
        table(&rows, &header, config.format)?,
    )];

    if config.impute.trajectories {
        let mut by_patient: BTreeMap<usize, BTreeMap<usize, &runner::Imputation>> = BTreeMap::new();
        for r in results
            .iter()
            .filter(|r| ds.arm_of(r.target.patient) == Some(r.target.arm))
        {
            by_patient
                .entry(r.target.patient)
                .or_default()
                .insert(r.target.visit, r);
        }
        let mut rows = Vec::new();
        for (&i, imputed) in &by_patient {
            let a = ds.arm_of(i).expect("own-arm targets have an arm");
            for t in 0..ds.n_visits() {
                let r = imputed.get(&t);
                let interval = r.and_then(|r| r.snn.as_ref()).and_then(|p| p.interval);
                rows.push(TrajectoryRow {
                    patient_id: &ds.patient_ids()[i],
                    visit: t + 1,
                    observed: ds.outcome(i, t, a),
                    predicted: r.map(|r| r.estimate),
                    lower: interval.map(|iv| iv.0),
                    upper: interval.map(|iv| iv.1),
                });
            }
        }
        files.push(OutputFile::new(
            format!("trajectories.{ext}"),
            table(&rows, &TRAJECTORY_HEADER, config.format)?,
        ));
    }
    with_manifest("impute", config, ds.arm_labels(), files)
}

#[derive(Serialize)]
struct SpectrumRow<'a> {
    arm: &'a str,
    k: usize,
    cumulative_energy: f64,
}

const SPECTRUM_HEADER: [&str; 3] = ["arm", "k", "cumulative_energy"];

/// Compliers' `[X, Y]` rows for one arm.
fn complier_matrix(ds: &TrialDataset, arm: usize) -> Result<Matrix> {
    let members = ds.compliers(arm);
    if members.len() < 2 {
        return Err(CliError::validation(format!(
            "arm {} has {} fully observed patients; at least 2 required",
            ds.arm_labels()[arm],
            members.len()
        )));
    }
    let width = ds.n_covariates() + ds.n_visits();
    let mut data = Vec::with_capacity(members.len() * width);
    for &i in &members {
        data.extend_from_slice(ds.covariate_row(i));
        data.extend(ds.trajectory(i));
    }
    Ok(Matrix::from_row_major(members.len(), width, data))
}

pub fn spectrum(config: &CliConfig) -> Result<Vec<OutputFile>> {
    let ds = load_or_generate(config)?;
    let top = config.spectrum.top;
    if top == 0 {
        return Err(CliError::validation("spectrum top must be at least 1"));
    }
    let (mut raw, mut standardized) = (Vec::new(), Vec::new());
    for arm in 0..ds.n_arms() {
        let m = complier_matrix(&ds, arm)?;
        let label = ds.arm_labels()[arm].as_str();
        let profiles = [
            (&mut raw, spectral_energy_profile(&m, top)?),
            (
                &mut standardized,
                spectral_energy_profile(&standardize_columns(&m).0, top)?,
            ),
        ];
        for (rows, profile) in profiles {
            rows.extend(profile.into_iter().enumerate().map(|(k, e)| SpectrumRow {
                arm: label,
                k: k + 1,
                cumulative_energy: e,
            }));
        }
    }
    let ext = config.format.extension();
    let files = vec![
        OutputFile::new(
            format!("spectrum_raw.{ext}"),
            table(&raw, &SPECTRUM_HEADER, config.format)?,
        ),
        OutputFile::new(
            format!("spectrum_standardized.{ext}"),
            table(&standardized, &SPECTRUM_HEADER, config.format)?,
        ),
    ];
    with_manifest("spectrum", config, ds.arm_labels(), files)
}

#[derive(Serialize)]
struct ReportRow<'a> {
    study: &'static str,
    repeat: usize,
    seed: u64,
    mechanism: Option<&'static str>,
    arm: &'a str,
    estimator: &'static str,
    metric: &'static str,
    value: Option<f64>,
    n_targets: usize,
}

const REPORT_HEADER: [&str; 9] = [
    "study",
    "repeat",
    "seed",
    "mechanism",
    "arm",
    "estimator",
    "metric",
    "value",
    "n_targets",
];

#[derive(Serialize)]
struct CountRow<'a> {
    repeat: usize,
    mechanism: &'static str,
    arm: &'a str,
    visit: usize,
    count: usize,
}

const COUNT_HEADER: [&str; 5] = ["repeat", "mechanism", "arm", "visit", "count"];

#[derive(Serialize)]
struct SummaryRow {
    study: &'static str,
    mechanism: Option<&'static str>,
    snn_mean_nmse: Option<f64>,
    best_baseline: Option<&'static str>,
    best_baseline_mean_nmse: Option<f64>,
    relative_improvement: Option<f64>,
    passed_mean_nmse: Option<f64>,
    failed_mean_nmse: Option<f64>,
    split_cells: usize,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    schema_version: &'static str,
    command: &'a str,
    seed: u64,
    arms: &'a [String],
    seeds: BTreeMap<&'static str, &'a [u64]>,
    summary_formula: &'static str,
    summary: Vec<SummaryRow>,
    rows: &'a [ReportRow<'a>],
    dropout_counts: &'a [CountRow<'a>],
    config: &'a CliConfig,
}

const SUMMARY_FORMULA: &str =
    "relative_improvement = 1 - mean(nmse of snn) / mean(nmse of best baseline), means over all (repeat, mechanism, arm) cells";

fn report_rows<'a>(report: &StudyReport, arms: &'a [String]) -> Vec<ReportRow<'a>> {
    let seed = |repeat: usize| report.config.repeat_seed(repeat);
    let mut rows: Vec<ReportRow> = report
        .rows
        .iter()
        .map(|r| ReportRow {
            study: r.study.as_str(),
            repeat: r.repeat,
            seed: seed(r.repeat),
            mechanism: r.mechanism.map(|m| m.as_str()),
            arm: &arms[r.arm],
            estimator: r.estimator.as_str(),
            metric: "nmse",
            value: r.nmse,
            n_targets: r.n_targets,
        })
        .collect();
    for d in &report.diagnostics_split {
        for (metric, value, n) in [
            ("nmse_passed", d.passed_nmse, d.n_passed),
            ("nmse_failed", d.failed_nmse, d.n_failed),
        ] {
            rows.push(ReportRow {
                study: d.study.as_str(),
                repeat: d.repeat,
                seed: seed(d.repeat),
                mechanism: d.mechanism.map(|m| m.as_str()),
                arm: &arms[d.arm],
                estimator: Estimator::Snn.as_str(),
                metric,
                value,
                n_targets: n,
            });
        }
    }
    rows
}

fn summary_rows(study: Study, report: &StudyReport) -> Vec<SummaryRow> {
    let mut scopes = vec![None];
    if study == Study::Dropout {
        scopes.extend(report.config.mechanisms.iter().copied().map(Some));
    }
    scopes
        .into_iter()
        .map(|mechanism| {
            let best = report.relative_improvement(study, mechanism);
            let diag = report.diagnostics_means(study, mechanism);
            SummaryRow {
                study: study.as_str(),
                mechanism: mechanism.map(|m| m.as_str()),
                snn_mean_nmse: report.mean_nmse(study, mechanism, Estimator::Snn),
                best_baseline: best.map(|b| b.0.as_str()),
                best_baseline_mean_nmse: best.and_then(|b| report.mean_nmse(study, mechanism, b.0)),
                relative_improvement: best.map(|b| b.1),
                passed_mean_nmse: diag.map(|d| d.0),
                failed_mean_nmse: diag.map(|d| d.1),
                split_cells: diag.map_or(0, |d| d.2),
            }
        })
        .collect()
}

/// Runs the requested studies and renders `report.csv`, `report.json` and,
/// for the dropout study, `dropout_counts.csv`.
fn study_outputs(command: &str, config: &CliConfig, studies: &[Study]) -> Result<Vec<OutputFile>> {
    let ds = load_or_generate(config)?;
    let study_config = config.study_config();
    let mut reports = Vec::new();
    for &study in studies {
        let report = match study {
            Study::Dropout => runner::dropout_study(&ds, &study_config)?,
            Study::SyntheticRct => runner::synthetic_rct_study(&ds, &study_config)?,
        };
        reports.push((study, report));
    }
    let arms = ds.arm_labels();
    let rows: Vec<ReportRow> = reports.iter().flat_map(|(_, r)| report_rows(r, arms)).collect();
    let counts: Vec<CountRow> = reports
        .iter()
        .flat_map(|(_, r)| r.dropout_counts.iter())
        .map(|c| CountRow {
            repeat: c.repeat,
            mechanism: c.mechanism.as_str(),
            arm: &arms[c.arm],
            visit: c.visit,
            count: c.count,
        })
        .collect();
    let json = ReportJson {
        schema_version: SCHEMA_VERSION,
        command,
        seed: config.seed,
        arms,
        seeds: reports.iter().map(|(s, r)| (s.as_str(), r.seeds.as_slice())).collect(),
        summary_formula: SUMMARY_FORMULA,
        summary: reports.iter().flat_map(|(s, r)| summary_rows(*s, r)).collect(),
        rows: &rows,
        dropout_counts: &counts,
        config,
    };
    let mut files = vec![
        OutputFile::new(
            "report.csv",
            table(&rows, &REPORT_HEADER, crate::config::OutputFormat::Csv)?,
        ),
        OutputFile::new("report.json", json_bytes(&json)?),
    ];
    if studies.contains(&Study::Dropout) {
        files.push(OutputFile::new(
            "dropout_counts.csv",
            table(&counts, &COUNT_HEADER, crate::config::OutputFormat::Csv)?,
        ));
    }
    with_manifest(command, config, arms, files)
}

pub fn synthetic_rct(config: &CliConfig) -> Result<Vec<OutputFile>> {
    study_outputs("synthetic-rct", config, &[Study::SyntheticRct])
}

pub fn evaluate(config: &CliConfig) -> Result<Vec<OutputFile>> {
    let mut studies = config.study.studies.clone();
    studies.dedup();
    if studies.is_empty() {
        return Err(CliError::validation("no studies selected"));
    }
    study_outputs("evaluate", config, &studies)
}
