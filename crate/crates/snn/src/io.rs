//! Dataset files and tabular outputs.
//!
//! Datasets are always CSV. Outcomes are long format with header
//! `patient_id,visit,arm,value` (visits numbered from 1, one row per observed
//! entry); covariates have header `patient_id,<label>,...`. Every other table
//! can be written as CSV or as a JSON array of row objects.

use std::fs;
use std::path::Path;

use serde::Serialize;
use snn_core::dgp::{DropoutRecord, GroundTruth};
use snn_core::tensor::DatasetBuilder;
use snn_core::TrialDataset;

use crate::config::OutputFormat;
use crate::error::{CliError, ErrorKind, Result};

pub const OUTCOME_HEADER: [&str; 4] = ["patient_id", "visit", "arm", "value"];

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let kind = if e.is_io_error() {
        ErrorKind::Io
    } else {
        ErrorKind::Validation
    };
    CliError::new(kind, e.to_string()).in_file(path)
}

fn malformed(path: &Path, line: u64, reason: impl Into<String>) -> CliError {
    CliError::from(snn_core::Error::MalformedRow {
        row: line as usize,
        reason: reason.into(),
    })
    .in_file(path)
}

fn parse_f64(path: &Path, line: u64, field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| malformed(path, line, format!("{what} {field:?} is not a number")))
}

/// Loads a dataset; patient order follows the covariate file and arm
/// indices follow first appearance in the outcome file.
pub fn read_dataset(outcomes: &Path, covariates: &Path) -> Result<TrialDataset> {
    let cov_bytes = read_file(covariates)?;
    let out_bytes = read_file(outcomes)?;

    let mut reader = csv::ReaderBuilder::new().from_reader(cov_bytes.as_slice());
    let header = reader.headers().map_err(|e| csv_error(covariates, e))?.clone();
    if header.get(0).map(str::trim) != Some("patient_id") {
        return Err(malformed(covariates, 1, "first column must be patient_id"));
    }
    let labels: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let mut builder = DatasetBuilder::new(labels);
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(covariates, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let values = record
            .iter()
            .skip(1)
            .map(|f| parse_f64(covariates, line, f, "covariate"))
            .collect::<Result<Vec<f64>>>()?;
        builder
            .add_patient(line as usize, record[0].trim(), values)
            .map_err(|e| CliError::from(e).in_file(covariates))?;
    }

    let mut reader = csv::ReaderBuilder::new().from_reader(out_bytes.as_slice());
    let header = reader.headers().map_err(|e| csv_error(outcomes, e))?.clone();
    if header.iter().map(str::trim).ne(OUTCOME_HEADER) {
        return Err(malformed(
            outcomes,
            1,
            format!("header must be {}", OUTCOME_HEADER.join(",")),
        ));
    }
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(outcomes, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let visit: usize = record[1].trim().parse().map_err(|_| {
            malformed(
                outcomes,
                line,
                format!("visit {:?} is not a positive integer", &record[1]),
            )
        })?;
        let value = parse_f64(outcomes, line, &record[3], "value")?;
        builder
            .add_outcome(line as usize, record[0].trim(), visit, record[2].trim(), value)
            .map_err(|e| CliError::from(e).in_file(outcomes))?;
    }
    builder.finish(None).map_err(|e| CliError::from(e).in_file(outcomes))
}

#[derive(Serialize)]
struct OutcomeRow<'a> {
    patient_id: &'a str,
    visit: usize,
    arm: &'a str,
    value: f64,
}

/// Outcome and covariate CSV bytes. Outcome rows are ordered by arm, then
/// patient, then visit, so reloading preserves arm indices.
pub fn dataset_csv(ds: &TrialDataset) -> Result<(Vec<u8>, Vec<u8>)> {
    let mut rows: Vec<(usize, usize, usize, f64)> = ds.records().collect();
    rows.sort_by_key(|&(i, t, a, _)| (a, i, t));
    let outcome_rows: Vec<OutcomeRow> = rows
        .iter()
        .map(|&(i, t, a, y)| OutcomeRow {
            patient_id: &ds.patient_ids()[i],
            visit: t + 1,
            arm: &ds.arm_labels()[a],
            value: y,
        })
        .collect();
    let outcomes = csv_bytes(&outcome_rows, Some(&OUTCOME_HEADER))?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["patient_id".to_string()];
    header.extend(ds.covariate_labels().iter().cloned());
    w.write_record(&header).map_err(write_error)?;
    for i in 0..ds.n_patients() {
        let mut rec = vec![ds.patient_ids()[i].clone()];
        rec.extend(ds.covariate_row(i).iter().map(|v| format_f64(*v)));
        w.write_record(&rec).map_err(write_error)?;
    }
    let covariates = w
        .into_inner()
        .map_err(|e| CliError::new(ErrorKind::Io, e.to_string()))?;
    Ok((outcomes, covariates))
}

/// Shortest representation that parses back to the same value, spelled
/// the way the CSV serializer spells floats.
fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

fn write_error(e: csv::Error) -> CliError {
    CliError::new(ErrorKind::Io, e.to_string())
}

fn csv_bytes<T: Serialize>(rows: &[T], empty_header: Option<&[&str]>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        if let Some(h) = empty_header {
            w.write_record(h).map_err(write_error)?;
        }
    }
    for r in rows {
        w.serialize(r).map_err(write_error)?;
    }
    w.into_inner().map_err(|e| CliError::new(ErrorKind::Io, e.to_string()))
}

/// Serializes rows as CSV (header from field names) or a JSON array.
/// `header` is written for an empty CSV table.
pub fn table<T: Serialize>(rows: &[T], header: &[&str], format: OutputFormat) -> Result<Vec<u8>> {
    match format {
        OutputFormat::Csv => csv_bytes(rows, Some(header)),
        OutputFormat::Json => json_bytes(&rows),
    }
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::new(ErrorKind::Io, e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[derive(Serialize)]
struct GroundTruthRow<'a> {
    patient_id: &'a str,
    visit: usize,
    arm: &'a str,
    mean_outcome: f64,
}

pub const GROUND_TRUTH_HEADER: [&str; 4] = ["patient_id", "visit", "arm", "mean_outcome"];

/// Noiseless means for every patient, visit and arm.
pub fn ground_truth_csv(truth: &GroundTruth, ds: &TrialDataset) -> Result<Vec<u8>> {
    let mut rows = Vec::with_capacity(ds.n_patients() * ds.n_visits() * ds.n_arms());
    for i in 0..ds.n_patients() {
        for t in 0..ds.n_visits() {
            for a in 0..ds.n_arms() {
                rows.push(GroundTruthRow {
                    patient_id: &ds.patient_ids()[i],
                    visit: t + 1,
                    arm: &ds.arm_labels()[a],
                    mean_outcome: truth.get(i, t, a),
                });
            }
        }
    }
    csv_bytes(&rows, Some(&GROUND_TRUTH_HEADER))
}

#[derive(Serialize)]
struct DropoutRow<'a> {
    patient_id: &'a str,
    arm: &'a str,
    first_missing_visit: usize,
    mechanism: &'static str,
}

pub const DROPOUT_HEADER: [&str; 4] = ["patient_id", "arm", "first_missing_visit", "mechanism"];

pub fn dropouts_table(records: &[DropoutRecord], ds: &TrialDataset, format: OutputFormat) -> Result<Vec<u8>> {
    let rows: Vec<DropoutRow> = records
        .iter()
        .map(|r| DropoutRow {
            patient_id: &ds.patient_ids()[r.patient],
            arm: &ds.arm_labels()[r.arm],
            first_missing_visit: r.first_missing_visit + 1,
            mechanism: r.mechanism.as_str(),
        })
        .collect();
    table(&rows, &DROPOUT_HEADER, format)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -2.5, 1e-300, 123456789.0, 1.0 / 3.0, 0.0, -0.0] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format_f64(70.0), "70.0");
    }
}
