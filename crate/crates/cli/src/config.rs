//! Per-command configuration. A config file is a JSON object with one
//! optional section per command; flags override file values, which override
//! the built-in defaults.

use std::path::Path;

use anyhow::{Context, Result};
use bsg_core::belief::BsgOptions;
use bsg_core::ceci::TrainConfig;
use bsg_core::dataset::SynthConfig;
use bsg_core::metrics::Grouping;
use bsg_core::search::BatchConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::run::UsageError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub count: i64,
    /// Partials per ground-truth graph.
    pub partials: usize,
    pub fraction: f64,
    pub synth: SynthConfig,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            count: 300,
            partials: 4,
            fraction: 0.5,
            synth: SynthConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub partials: usize,
    pub fraction: f64,
    pub seed: u64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            partials: 4,
            fraction: 0.5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub grouping: Grouping,
    /// Test samples whose node histograms are dumped side by side.
    pub comparison_samples: usize,
    pub comparison_partials: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            grouping: Grouping::Pooled,
            comparison_samples: 3,
            comparison_partials: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictConfig {
    pub top_k: usize,
    pub options: BsgOptions,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            top_k: 3,
            options: BsgOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Use only the first this many test graphs.
    pub max_graphs: Option<usize>,
    pub batch: BatchConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    gen: Option<serde_json::Value>,
    ingest: Option<serde_json::Value>,
    train: Option<serde_json::Value>,
    eval: Option<serde_json::Value>,
    predict: Option<serde_json::Value>,
    search: Option<serde_json::Value>,
}

pub struct Configs {
    file: ConfigFile,
}

impl Configs {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let file = match path {
            None => ConfigFile::default(),
            Some(p) => {
                let bytes = std::fs::read(p).with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_slice(&bytes).with_context(|| format!("parsing config {}", p.display()))?
            }
        };
        Ok(Self { file })
    }

    fn section<T: DeserializeOwned + Default>(value: &Option<serde_json::Value>, name: &str) -> Result<T> {
        match value {
            None => Ok(T::default()),
            Some(v) => serde_json::from_value(v.clone())
                .map_err(|e| UsageError(format!("config section {name:?}: {e}")).into()),
        }
    }

    pub fn gen(&self) -> Result<GenConfig> {
        Self::section(&self.file.gen, "gen")
    }

    pub fn ingest(&self) -> Result<IngestConfig> {
        Self::section(&self.file.ingest, "ingest")
    }

    pub fn train(&self) -> Result<TrainConfig> {
        Self::section(&self.file.train, "train")
    }

    pub fn eval(&self) -> Result<EvalConfig> {
        Self::section(&self.file.eval, "eval")
    }

    pub fn predict(&self) -> Result<PredictConfig> {
        Self::section(&self.file.predict, "predict")
    }

    pub fn search(&self) -> Result<SearchConfig> {
        Self::section(&self.file.search, "search")
    }
}
