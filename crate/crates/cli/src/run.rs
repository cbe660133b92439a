//! Output directories, run manifests and exit-code classification.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use bsg_core::error::{BeliefError, Error, ModelError, SearchError};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";
pub const PARTIAL_MARKER: &str = ".partial";

/// Error for invalid flag combinations detected after argument parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

fn model_is_numeric(e: &ModelError) -> bool {
    matches!(e, ModelError::Diverged { .. } | ModelError::NonFinite { .. })
}

/// 2 usage, 4 numeric failure, 3 anything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        let numeric = if let Some(e) = cause.downcast_ref::<ModelError>() {
            model_is_numeric(e)
        } else if let Some(e) = cause.downcast_ref::<BeliefError>() {
            matches!(e, BeliefError::Model(m) if model_is_numeric(m))
        } else if let Some(e) = cause.downcast_ref::<SearchError>() {
            matches!(e, SearchError::Model(m) if model_is_numeric(m))
        } else if let Some(e) = cause.downcast_ref::<Error>() {
            match e {
                Error::Model(m) | Error::Belief(BeliefError::Model(m)) | Error::Search(SearchError::Model(m)) => {
                    model_is_numeric(m)
                }
                _ => false,
            }
        } else {
            false
        };
        if numeric {
            return 4;
        }
    }
    3
}

#[derive(Clone, Debug, Serialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

/// Record written next to the outputs of every command.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<InputHash>,
    pub catalog_fingerprint: String,
    pub tool_version: String,
    /// Unix seconds; `SOURCE_DATE_EPOCH` pins both timestamps.
    pub started_at: u64,
    pub finished_at: u64,
}

fn now() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()) {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            out.push(path.strip_prefix(root).unwrap_or(&path).to_path_buf());
        }
    }
    Ok(())
}

/// SHA-256 of a file, or of a directory as the digest of its sorted
/// `relative-path sha256` lines. Run manifests and markers are skipped.
pub fn hash_path(path: &Path) -> Result<String> {
    if path.is_dir() {
        let mut files = Vec::new();
        collect_files(path, path, &mut files).with_context(|| format!("reading {}", path.display()))?;
        files.retain(|f| !matches!(f.to_str(), Some(MANIFEST | PARTIAL_MARKER)));
        files.sort();
        let mut h = Sha256::new();
        for f in files {
            let digest = hex::encode(Sha256::digest(std::fs::read(path.join(&f))?));
            h.update(format!("{} {digest}\n", f.display()));
        }
        Ok(hex::encode(h.finalize()))
    } else {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(hex::encode(Sha256::digest(bytes)))
    }
}

/// An output directory for one command. The `.partial` marker stays in
/// place until [`Run::finish`] writes the manifest.
pub struct Run {
    pub out: PathBuf,
    command: String,
    started_at: u64,
    inputs: Vec<InputHash>,
    seeds: BTreeMap<String, u64>,
}

impl Run {
    pub fn start(out: &Path, command: &str) -> Result<Self> {
        std::fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))?;
        std::fs::write(out.join(PARTIAL_MARKER), format!("{command}\n"))
            .with_context(|| format!("writing to {}", out.display()))?;
        let _ = std::fs::remove_file(out.join(MANIFEST));
        Ok(Self {
            out: out.to_path_buf(),
            command: command.into(),
            started_at: now(),
            inputs: Vec::new(),
            seeds: BTreeMap::new(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(InputHash {
            path: path.display().to_string(),
            sha256: hash_path(path)?,
        });
        Ok(())
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.into(), value);
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))
    }

    pub fn finish(self, config: &impl Serialize, catalog_fingerprint: String) -> Result<()> {
        let manifest = RunManifest {
            command: self.command.clone(),
            config: serde_json::to_value(config)?,
            seeds: self.seeds.clone(),
            inputs: self.inputs.clone(),
            catalog_fingerprint,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            started_at: self.started_at,
            finished_at: now(),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        self.write(MANIFEST, bytes)?;
        std::fs::remove_file(self.path(PARTIAL_MARKER))?;
        Ok(())
    }
}
