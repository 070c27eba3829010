use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{CliConfig, SCHEMA_VERSION};
use crate::error::{CliError, Result};
use crate::io::json_bytes;

/// A fully rendered output file, written only after every output of a
/// command has been produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl OutputFile {
    pub fn new(name: impl Into<String>, bytes: Vec<u8>) -> Self {
        OutputFile {
            name: name.into(),
            bytes,
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: &'static str,
    command: &'a str,
    seed: u64,
    arms: &'a [String],
    files: Vec<&'a str>,
    config: &'a CliConfig,
}

/// Appends `manifest.json`, which lists the other files and echoes the
/// effective configuration.
pub fn with_manifest(
    command: &str,
    config: &CliConfig,
    arms: &[String],
    mut files: Vec<OutputFile>,
) -> Result<Vec<OutputFile>> {
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        command,
        seed: config.seed,
        arms,
        files: files.iter().map(|f| f.name.as_str()).collect(),
        config,
    };
    let bytes = json_bytes(&manifest)?;
    files.push(OutputFile::new("manifest.json", bytes));
    Ok(files)
}

/// Writes every file into `dir`. On the first failure, files already
/// written (and the directory, if this call created it) are removed.
pub fn write_all(dir: &Path, files: &[OutputFile]) -> Result<Vec<PathBuf>> {
    let created_dir = !dir.exists();
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::with_capacity(files.len());
    for f in files {
        let path = dir.join(&f.name);
        if let Err(e) = fs::write(&path, &f.bytes) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            if created_dir {
                let _ = fs::remove_dir(dir);
            }
            return Err(CliError::io(&path, e));
        }
        written.push(path);
    }
    Ok(written)
}
