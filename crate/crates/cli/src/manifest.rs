use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub kind: String,
    pub message: String,
    /// Simulation time at which the failure was detected, when known.
    pub t: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    /// `running` while computing, then `complete` or `invalid`.
    pub status: String,
    pub config: Value,
    pub derived: Value,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
    pub elapsed_seconds: Option<f64>,
    pub files: Vec<FileEntry>,
    pub failure: Option<Failure>,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// An output directory with its manifest; outputs go through [`RunOutput::write`]
/// so every file is checksummed.
pub struct RunOutput {
    dir: PathBuf,
    manifest: Manifest,
    clock: Instant,
}

impl RunOutput {
    /// Creates the directory and writes the initial manifest. Refuses to
    /// reuse a directory holding a manifest unless `force` is set.
    pub fn create(dir: &Path, force: bool, command: &str, config: Value, derived: Value) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST);
        if path.exists() && !force {
            return Err(CliError::Validation {
                key: "out".into(),
                message: format!("{} already holds a run; pass --force to overwrite", dir.display()),
            });
        }
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let out = Self {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                command: command.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                status: "running".into(),
                config,
                derived,
                started_unix: now(),
                finished_unix: None,
                elapsed_seconds: None,
                files: vec![],
                failure: None,
            },
            clock: Instant::now(),
        };
        out.flush()?;
        Ok(out)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn flush(&self) -> Result<(), CliError> {
        let path = self.dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.manifest.files.retain(|f| f.name != name);
        self.manifest.files.push(FileEntry {
            name: name.into(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).expect("summary serializes");
        self.write(name, (text + "\n").as_bytes())
    }

    fn finish_with(mut self, status: &str, failure: Option<Failure>) -> Result<(), CliError> {
        self.manifest.status = status.into();
        self.manifest.failure = failure;
        self.manifest.finished_unix = Some(now());
        self.manifest.elapsed_seconds = Some(self.clock.elapsed().as_secs_f64());
        self.flush()
    }

    pub fn complete(self) -> Result<(), CliError> {
        self.finish_with("complete", None)
    }

    /// Marks every output as invalid and records why.
    pub fn fail(self, err: &CliError) -> Result<(), CliError> {
        let failure = Failure {
            kind: err.kind().into(),
            message: err.to_string(),
            t: err.failure_time(),
        };
        self.finish_with("invalid", Some(failure))
    }
}

/// Deterministic CSV: header plus rows of shortest round-trip floats.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn num(x: f64) -> String {
    format!("{x:e}")
}
