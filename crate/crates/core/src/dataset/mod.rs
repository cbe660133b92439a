//! Training-data production: annotated spaces in, ground-truth and partial
//! scene graphs out.

mod conditional;
mod degrade;
mod encode;
mod mapping;
mod split;
mod store;
mod synth;

use std::collections::{BTreeSet, HashSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::catalog::ClassCatalog;
use crate::error::DatasetError;
use crate::graph::json::to_canonical_bytes;
use crate::graph::{NodeId, SceneEdge, SceneGraph, SceneNode};

pub use conditional::{empirical_conditional, Conditional, Event};
pub use degrade::{degrade, deletion_count, make_sample, DatasetSample};
pub use encode::{encode, FeatureMatrix};
pub use mapping::{ClassMapping, MappingTarget};
pub use split::{split, split_indices, Split};
pub use store::{read_dataset, read_manifest, write_dataset, DatasetManifest, SampleEntry, DATASET_SCHEMA, MANIFEST_FILE};
pub use synth::{synthesize, Archetype, BuildingType, ObjectSpec, SynthConfig};

pub const SPACE_SCHEMA: &str = "bsg-space/1";

/// Id of the building node created by [`ingest`].
pub const BUILDING_ID: &str = "building";

/// Semantically annotated space: regions with raw object categories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotatedSpace {
    pub id: String,
    pub regions: Vec<Region>,
    pub schema: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub id: String,
    pub objects: Vec<RawObject>,
    pub raw_label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawObject {
    pub raw_category: String,
}

impl AnnotatedSpace {
    pub fn from_json(bytes: &[u8]) -> Result<Self, DatasetError> {
        let space: AnnotatedSpace = serde_json::from_slice(bytes)
            .map_err(|e| DatasetError::Schema("<unparsed>".into(), e.to_string()))?;
        if space.schema != SPACE_SCHEMA {
            return Err(DatasetError::Schema(
                space.id,
                format!("expected schema {SPACE_SCHEMA:?}, found {:?}", space.schema),
            ));
        }
        Ok(space)
    }

    pub fn to_json(&self) -> Result<Vec<u8>, DatasetError> {
        Ok(to_canonical_bytes(self)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        Self::from_json(&std::fs::read(path)?)
    }
}

pub fn room_id(region_id: &str) -> NodeId {
    NodeId::new(format!("room-{region_id}"))
}

/// Result of [`ingest`]: the graph plus the raw categories that were dropped.
#[derive(Clone, Debug)]
pub struct Ingested {
    pub graph: SceneGraph,
    /// Raw categories mapped to DROP, sorted.
    pub dropped: Vec<String>,
    /// Raw categories without a mapping rule (also dropped), sorted.
    pub unmapped: Vec<String>,
}

/// Builds a three-layer scene graph from an annotated space.
///
/// Every region becomes a room labeled `room`; each raw object whose mapped
/// label is not DROP becomes an object node inside that room.
pub fn ingest(
    space: &AnnotatedSpace,
    mapping: &ClassMapping,
    catalog: &Arc<ClassCatalog>,
) -> Result<Ingested, DatasetError> {
    if space.schema != SPACE_SCHEMA {
        return Err(DatasetError::Schema(
            space.id.clone(),
            format!("expected schema {SPACE_SCHEMA:?}, found {:?}", space.schema),
        ));
    }
    if space.regions.is_empty() {
        return Err(DatasetError::EmptySpace(space.id.clone()));
    }
    mapping.check(catalog)?;

    let mut nodes = vec![SceneNode::building(BUILDING_ID)];
    let mut edges = Vec::new();
    let mut region_ids = HashSet::new();
    let mut dropped = BTreeSet::new();
    let mut unmapped = BTreeSet::new();
    for region in &space.regions {
        if region.id.is_empty() || !region_ids.insert(region.id.as_str()) {
            return Err(DatasetError::Schema(
                space.id.clone(),
                format!("region id {:?} is empty or repeated", region.id),
            ));
        }
        let room = room_id(&region.id);
        nodes.push(SceneNode::room(room.clone()));
        edges.push(SceneEdge::contains(BUILDING_ID, room.clone()));
        let mut k = 0usize;
        for obj in &region.objects {
            match mapping.target(&obj.raw_category) {
                Some(MappingTarget::Label(label)) => {
                    let id = NodeId::new(format!("{room}/obj-{k:03}"));
                    k += 1;
                    nodes.push(SceneNode::object(id.clone(), label.clone()));
                    edges.push(SceneEdge::contains(room.clone(), id));
                }
                Some(MappingTarget::Drop) => {
                    dropped.insert(obj.raw_category.clone());
                }
                None => {
                    if unmapped.insert(obj.raw_category.clone()) {
                        log::warn!(
                            "space {}: no mapping for raw category {:?}, dropping",
                            space.id,
                            obj.raw_category
                        );
                    }
                }
            }
        }
    }
    let graph = SceneGraph::validated(catalog.clone(), nodes, edges)?;
    Ok(Ingested {
        graph,
        dropped: dropped.into_iter().collect(),
        unmapped: unmapped.into_iter().collect(),
    })
}

/// Synthesizes `count` spaces, ingests them with the identity mapping and
/// degrades each ground truth into `partials` partial graphs.
pub fn synthetic_samples(
    config: &SynthConfig,
    count: i64,
    partials: usize,
    fraction: f64,
    catalog: &Arc<ClassCatalog>,
) -> Result<Vec<DatasetSample>, DatasetError> {
    config.check_catalog(catalog)?;
    let mapping = ClassMapping::identity(catalog);
    synthesize(config, count)?
        .iter()
        .map(|space| {
            let gt = ingest(space, &mapping, catalog)?.graph;
            make_sample(&space.id, gt, partials, fraction, config.seed)
        })
        .collect()
}
