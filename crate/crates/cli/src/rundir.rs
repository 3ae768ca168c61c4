//! Run directory layout, artifact I/O and the append-only manifest.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use hybrid_ids::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CONFIG: &str = "config.json";
pub const MANIFEST: &str = "manifest.json";
pub const ENCODING: &str = "encoding.json";
pub const NORMALIZATION: &str = "normalization.json";
pub const PREPARED: &str = "prepared.csv";
pub const PREPARED_INFO: &str = "prepared.json";
pub const SELECTION: &str = "selection.json";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const LOSS: &str = "loss.csv";
pub const THRESHOLD: &str = "threshold.json";
pub const METRICS: &str = "metrics.json";
pub const SWEEP: &str = "sweep.csv";

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| io_err(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data {
        line: Some(e.line()),
        message: format!("{}: {e}", path.display()),
    })
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

/// One command execution.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub command: String,
    pub started_at: String,
    pub finished_at: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputRecord>,
    pub artifacts: Vec<ArtifactRecord>,
    pub versions: Versions,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Versions {
    pub hybrid_ids: String,
    pub manifest_format: u32,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub runs: Vec<ManifestEntry>,
}

fn timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Collects the files one command writes, then records them in the manifest.
pub struct RunDir {
    root: PathBuf,
    overwrite: bool,
    command: String,
    started: DateTime<Utc>,
    inputs: Vec<InputRecord>,
    staged: Vec<(String, Vec<u8>)>,
}

impl RunDir {
    /// Fails before any work if an artifact this command will write already
    /// exists and `overwrite` is off.
    pub fn open(root: &Path, command: &str, writes: &[&str], overwrite: bool) -> Result<Self> {
        if !overwrite {
            if let Some(existing) = writes.iter().find(|f| root.join(f).exists()) {
                return Err(Error::Config(format!(
                    "{} already exists; use a new --out directory or pass --overwrite",
                    root.join(existing).display()
                )));
            }
        }
        Ok(Self {
            root: root.to_path_buf(),
            overwrite,
            command: command.to_owned(),
            started: Utc::now(),
            inputs: Vec::new(),
            staged: Vec::new(),
        })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.root.join(file)
    }

    pub fn require(&self, file: &str) -> Result<PathBuf> {
        let p = self.path(file);
        if p.exists() {
            Ok(p)
        } else {
            Err(Error::Config(format!(
                "{} is missing; run the earlier pipeline step first",
                p.display()
            )))
        }
    }

    pub fn record_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(InputRecord {
            path: path.to_path_buf(),
            sha256: sha256_hex(bytes),
        });
    }

    pub fn stage(&mut self, file: &str, contents: impl Into<Vec<u8>>) {
        self.staged.push((file.to_owned(), contents.into()));
    }

    pub fn stage_json<T: Serialize>(&mut self, file: &str, value: &T) -> Result<()> {
        let text = to_json(value)?;
        self.stage(file, text);
        Ok(())
    }

    /// Writes staged files and appends a manifest entry.
    pub fn commit<T: Serialize>(self, config: &T) -> Result<()> {
        fs::create_dir_all(&self.root).map_err(|e| io_err(&self.root, e))?;
        let mut artifacts = Vec::new();
        for (file, bytes) in &self.staged {
            let path = self.root.join(file);
            if path.exists() && !self.overwrite && file != CONFIG {
                return Err(Error::Config(format!("{} already exists", path.display())));
            }
            fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
            artifacts.push(ArtifactRecord {
                file: file.clone(),
                sha256: sha256_hex(bytes),
                bytes: bytes.len(),
            });
        }
        let manifest_path = self.root.join(MANIFEST);
        let mut manifest: RunManifest = if manifest_path.exists() {
            read_json(&manifest_path)?
        } else {
            RunManifest::default()
        };
        manifest.runs.push(ManifestEntry {
            command: self.command,
            started_at: timestamp(self.started),
            finished_at: timestamp(Utc::now()),
            config: serde_json::to_value(config)?,
            inputs: self.inputs,
            artifacts,
            versions: Versions {
                hybrid_ids: env!("CARGO_PKG_VERSION").to_owned(),
                manifest_format: 1,
            },
        });
        let text = to_json(&manifest)?;
        fs::write(&manifest_path, text).map_err(|e| io_err(&manifest_path, e))
    }
}
