use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to re-run a command: the argument vector, resolved
/// configuration, seeds and content hashes of every input and output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub tool_version: String,
    pub config_paths: Vec<PathBuf>,
    pub seeds: BTreeMap<String, u64>,
    pub effective_config: serde_json::Value,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub threads: usize,
    pub wall_time_s: f64,
    pub exit_code: u8,
}

pub struct ManifestBuilder {
    manifest: RunManifest,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        Self {
            manifest: RunManifest {
                command: command.to_string(),
                args: std::env::args().collect(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                config_paths: Vec::new(),
                seeds: BTreeMap::new(),
                effective_config: serde_json::Value::Null,
                inputs: Vec::new(),
                outputs: Vec::new(),
                threads: rayon::current_num_threads(),
                wall_time_s: 0.0,
                exit_code: 0,
            },
            started: Instant::now(),
        }
    }

    pub fn config_path(&mut self, path: &Path) {
        self.manifest.config_paths.push(path.to_path_buf());
    }

    pub fn seed(&mut self, name: &str, seed: u64) {
        self.manifest.seeds.insert(name.to_string(), seed);
    }

    pub fn effective_config(&mut self, config: &impl Serialize) {
        self.manifest.effective_config = serde_json::to_value(config).unwrap_or(serde_json::Value::Null);
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.manifest.inputs.push(record(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<(), CliError> {
        self.manifest.outputs.push(record(path)?);
        Ok(())
    }

    /// Writes `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path, exit_code: u8) -> Result<PathBuf, CliError> {
        self.manifest.wall_time_s = self.started.elapsed().as_secs_f64();
        self.manifest.exit_code = exit_code;
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::input(e.to_string()))?;
        write_file(&path, text + "\n")?;
        Ok(path)
    }
}

fn record(path: &Path) -> Result<FileRecord, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    Ok(FileRecord {
        path: path.to_path_buf(),
        sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
    })
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}
