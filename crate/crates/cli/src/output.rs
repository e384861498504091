// SPDX-License-Identifier: Apache-2.0

//! Artifacts written to the output directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Identity stamped on every artifact of one run.
#[derive(Debug, Clone)]
pub struct Stamp {
    pub command: &'static str,
    pub config_hash: String,
    pub seed: u64,
}

impl Stamp {
    /// Hashes the canonical JSON form of the effective configuration.
    pub fn new<C: Serialize>(command: &'static str, effective: &C, seed: u64) -> Self {
        let canonical = serde_json::to_vec(effective).expect("configuration serializes");
        let config_hash = hex::encode(Sha256::digest(&canonical));
        Self { command, config_hash, seed }
    }

    fn header(&self) -> String {
        format!(
            "# slowbond {} version={} config_sha256={} seed={}\n",
            self.command,
            env!("CARGO_PKG_VERSION"),
            self.config_hash,
            self.seed
        )
    }
}

pub struct OutDir {
    root: PathBuf,
    stamp: Stamp,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path, stamp: Stamp) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        let probe = root.join(".slowbond-write-test");
        File::create(&probe).map_err(|e| CliError::io(root, e))?;
        let _ = std::fs::remove_file(&probe);
        Ok(Self { root: root.to_path_buf(), stamp, written: Vec::new() })
    }

    /// Writes a stamped CSV file from serializable rows.
    pub fn csv<R: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = R>) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut out = BufWriter::new(file);
        out.write_all(self.stamp.header().as_bytes()).map_err(|e| CliError::io(&path, e))?;
        let mut writer = csv::Writer::from_writer(out);
        for row in rows {
            writer.serialize(row).map_err(|e| csv_error(&path, e))?;
        }
        writer.flush().map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(path)
    }

    /// Final manifest: configuration echo, seed, version and wall time.
    pub fn manifest<C: Serialize>(
        mut self,
        config: &C,
        wall: Duration,
        passed: Option<bool>,
    ) -> Result<PathBuf, CliError> {
        let files = self.written.clone();
        let manifest = Manifest {
            command: self.stamp.command,
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: self.stamp.config_hash.clone(),
            seed: self.stamp.seed,
            wall_time_s: wall.as_secs_f64(),
            passed,
            files,
            config: serde_json::to_value(config).map_err(|e| CliError::Data(e.to_string()))?,
        };
        self.json("manifest.json", &manifest)
    }
}

#[derive(Serialize)]
struct Manifest {
    command: &'static str,
    version: &'static str,
    config_sha256: String,
    seed: u64,
    wall_time_s: f64,
    passed: Option<bool>,
    files: Vec<String>,
    config: serde_json::Value,
}

pub fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Data(format!("{}: {other:?}", path.display())),
    }
}

/// Uniform pass/fail record shared by every command.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Summary {
    pub test: String,
    pub statistic: f64,
    pub target: f64,
    pub std_error: Option<f64>,
    pub z: Option<f64>,
    pub pass: bool,
}
