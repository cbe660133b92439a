//! On-disk dataset layout:
//!
//! ```text
//! dataset.json              manifest (schema bsg-dataset/1)
//! spaces/<id>.json          annotated spaces, when available
//! graphs/<id>.json          ground-truth scene graphs
//! partials/<id>/<k>.json    degraded partials
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{AnnotatedSpace, DatasetSample, Split};
use crate::catalog::ClassCatalog;
use crate::error::DatasetError;
use crate::graph::json::to_canonical_bytes;
use crate::graph::SceneGraph;

pub const DATASET_SCHEMA: &str = "bsg-dataset/1";
pub const MANIFEST_FILE: &str = "dataset.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleEntry {
    pub id: String,
    pub partial_seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub schema: String,
    pub catalog_fingerprint: String,
    pub seed: u64,
    pub fraction: f64,
    pub samples: Vec<SampleEntry>,
    /// Sample ids per split.
    pub split: Split<String>,
}

fn check_id(id: &str) -> Result<(), DatasetError> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
    if ok {
        Ok(())
    } else {
        Err(DatasetError::Schema(id.into(), "id is not usable as a file name".into()))
    }
}

fn graph_path(dir: &Path, id: &str) -> PathBuf {
    dir.join("graphs").join(format!("{id}.json"))
}

fn partial_path(dir: &Path, id: &str, k: usize) -> PathBuf {
    dir.join("partials").join(id).join(format!("{k}.json"))
}

/// Writes `samples` (and `spaces`, if any) under `dir`.
pub fn write_dataset(
    dir: &Path,
    samples: &Split<DatasetSample>,
    spaces: &[AnnotatedSpace],
    seed: u64,
    fraction: f64,
) -> Result<DatasetManifest, DatasetError> {
    let all: Vec<&DatasetSample> = samples.train.iter().chain(&samples.val).chain(&samples.test).collect();
    let first = all.first().ok_or(DatasetError::EmptyDataset)?;
    let fingerprint = first.ground_truth.catalog().fingerprint_hex();
    for sub in ["graphs", "partials"] {
        std::fs::create_dir_all(dir.join(sub))?;
    }
    if !spaces.is_empty() {
        std::fs::create_dir_all(dir.join("spaces"))?;
    }
    for space in spaces {
        check_id(&space.id)?;
        std::fs::write(dir.join("spaces").join(format!("{}.json", space.id)), space.to_json()?)?;
    }
    let mut entries = Vec::with_capacity(all.len());
    for s in &all {
        check_id(&s.source_id)?;
        if s.ground_truth.catalog().fingerprint_hex() != fingerprint {
            return Err(DatasetError::Schema(s.source_id.clone(), "catalog differs from the first sample".into()));
        }
        s.ground_truth.write(graph_path(dir, &s.source_id))?;
        std::fs::create_dir_all(dir.join("partials").join(&s.source_id))?;
        for (k, p) in s.partials.iter().enumerate() {
            p.write(partial_path(dir, &s.source_id, k))?;
        }
        entries.push(SampleEntry {
            id: s.source_id.clone(),
            partial_seeds: s.partial_seeds.clone(),
        });
    }
    let ids = |v: &[DatasetSample]| v.iter().map(|s| s.source_id.clone()).collect();
    let manifest = DatasetManifest {
        schema: DATASET_SCHEMA.into(),
        catalog_fingerprint: fingerprint,
        seed,
        fraction,
        samples: entries,
        split: Split {
            train: ids(&samples.train),
            val: ids(&samples.val),
            test: ids(&samples.test),
        },
    };
    std::fs::write(dir.join(MANIFEST_FILE), to_canonical_bytes(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest, DatasetError> {
    let path = dir.join(MANIFEST_FILE);
    let bytes = std::fs::read(&path)
        .map_err(|e| DatasetError::Schema(path.display().to_string(), format!("cannot read manifest: {e}")))?;
    let manifest: DatasetManifest =
        serde_json::from_slice(&bytes).map_err(|e| DatasetError::Schema(path.display().to_string(), e.to_string()))?;
    if manifest.schema != DATASET_SCHEMA {
        return Err(DatasetError::Schema(
            path.display().to_string(),
            format!("expected schema {DATASET_SCHEMA:?}, found {:?}", manifest.schema),
        ));
    }
    Ok(manifest)
}

/// Reads the dataset under `dir`, checking every graph against `catalog`.
pub fn read_dataset(dir: &Path, catalog: &Arc<ClassCatalog>) -> Result<(DatasetManifest, Split<DatasetSample>), DatasetError> {
    let manifest = read_manifest(dir)?;
    if manifest.catalog_fingerprint != catalog.fingerprint_hex() {
        return Err(DatasetError::Schema(
            dir.display().to_string(),
            "dataset was built with a different class catalog".into(),
        ));
    }
    let load = |id: &String| -> Result<DatasetSample, DatasetError> {
        check_id(id)?;
        let entry = manifest
            .samples
            .iter()
            .find(|e| e.id == *id)
            .ok_or_else(|| DatasetError::Schema(id.clone(), "split names an unknown sample".into()))?;
        let read = |p: PathBuf| -> Result<SceneGraph, DatasetError> {
            Ok(SceneGraph::from_json_with_catalog(&std::fs::read(&p)?, Some(catalog))?)
        };
        let partials = (0..entry.partial_seeds.len())
            .map(|k| read(partial_path(dir, id, k)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DatasetSample {
            source_id: id.clone(),
            ground_truth: read(graph_path(dir, id))?,
            partials,
            partial_seeds: entry.partial_seeds.clone(),
        })
    };
    let part = |ids: &[String]| ids.iter().map(load).collect::<Result<Vec<_>, _>>();
    let split = Split {
        train: part(&manifest.split.train)?,
        val: part(&manifest.split.val)?,
        test: part(&manifest.split.test)?,
    };
    Ok((manifest, split))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{split, synthetic_samples, SynthConfig};

    #[test]
    fn round_trip() {
        let catalog = Arc::new(ClassCatalog::default_catalog());
        let samples = synthetic_samples(&SynthConfig::default(), 12, 2, 0.5, &catalog).unwrap();
        let parts = split(samples, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let written = write_dataset(dir.path(), &parts, &[], 0, 0.5).unwrap();
        let (manifest, back) = read_dataset(dir.path(), &catalog).unwrap();
        assert_eq!(manifest, written);
        assert_eq!(back.test.len(), parts.test.len());
        for (a, b) in back.train.iter().zip(&parts.train) {
            assert_eq!(a.ground_truth, b.ground_truth);
            assert_eq!(a.partials, b.partials);
        }
        let other = Arc::new(ClassCatalog::new(["x", "y"]).unwrap());
        assert!(read_dataset(dir.path(), &other).is_err());
    }

    #[test]
    fn rejects_path_like_ids() {
        assert!(check_id("../x").is_err());
        assert!(check_id("a/b").is_err());
        assert!(check_id("space-0001").is_ok());
    }
}
