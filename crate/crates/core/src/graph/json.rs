//! Canonical JSON form of scene graphs (`bsg-scene/1`).
//!
//! Keys are emitted in sorted order and nodes/edges in canonical order, so
//! serializing the same graph always yields the same bytes.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{EdgeKind, Layer, NodeId, SceneEdge, SceneGraph, SceneNode};
use crate::catalog::ClassCatalog;
use crate::error::GraphError;

pub const SCENE_SCHEMA: &str = "bsg-scene/1";

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct NodeRecord {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub blind: bool,
    pub class: String,
    pub id: NodeId,
    pub layer: Layer,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct EdgeRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    pub from: NodeId,
    pub kind: EdgeKind,
    pub to: NodeId,
}

/// Per-node belief payload carried by belief-graph files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeliefRecord {
    pub counts: Vec<f64>,
    pub distribution: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct GraphFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beliefs: Option<BTreeMap<NodeId, BeliefRecord>>,
    pub catalog: Vec<String>,
    pub edges: Vec<EdgeRecord>,
    pub nodes: Vec<NodeRecord>,
    pub schema: String,
}

impl GraphFile {
    pub(crate) fn from_graph(g: &SceneGraph, schema: &str) -> Self {
        Self {
            beliefs: None,
            catalog: g.catalog().labels().to_vec(),
            edges: g
                .edges()
                .iter()
                .map(|e| EdgeRecord {
                    cost: e.cost,
                    from: e.from.clone(),
                    kind: e.kind,
                    to: e.to.clone(),
                })
                .collect(),
            nodes: g
                .nodes()
                .iter()
                .map(|n| NodeRecord {
                    attrs: n.attributes.clone(),
                    blind: n.layer == Layer::Blind,
                    class: n.class_label.clone(),
                    id: n.id.clone(),
                    layer: n.layer,
                })
                .collect(),
            schema: schema.to_owned(),
        }
    }

    /// Rebuilds and validates the graph, reusing `catalog` when its labels match.
    pub(crate) fn into_graph(
        self,
        expected_schema: &str,
        catalog: Option<&Arc<ClassCatalog>>,
    ) -> Result<SceneGraph, GraphError> {
        if self.schema != expected_schema {
            return Err(GraphError::SchemaVersion {
                expected: expected_schema.to_owned(),
                found: self.schema,
            });
        }
        let catalog = match catalog {
            Some(c) if c.labels() == self.catalog.as_slice() => c.clone(),
            Some(_) => {
                return Err(GraphError::Catalog(
                    "file catalog differs from the expected catalog".into(),
                ))
            }
            None => Arc::new(ClassCatalog::new(self.catalog)?),
        };
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for r in self.nodes {
            if r.blind != (r.layer == Layer::Blind) {
                return Err(GraphError::Malformed(format!(
                    "node {}: blind flag disagrees with layer {:?}",
                    r.id, r.layer
                )));
            }
            nodes.push(SceneNode {
                id: r.id,
                layer: r.layer,
                class_label: r.class,
                attributes: r.attrs,
            });
        }
        let edges = self
            .edges
            .into_iter()
            .map(|r| SceneEdge {
                from: r.from,
                to: r.to,
                kind: r.kind,
                cost: r.cost,
            })
            .collect();
        SceneGraph::validated(catalog, nodes, edges)
    }
}

pub(crate) fn to_canonical_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, serde_json::Error> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

impl SceneGraph {
    /// Serializes a valid graph to canonical JSON.
    pub fn to_json(&self) -> Result<Vec<u8>, GraphError> {
        let report = self.validate();
        if !report.is_empty() {
            return Err(GraphError::Invalid(report));
        }
        Ok(to_canonical_bytes(&GraphFile::from_graph(self, SCENE_SCHEMA))?)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, GraphError> {
        Self::from_json_with_catalog(bytes, None)
    }

    /// Like [`SceneGraph::from_json`], additionally requiring the file's catalog to equal `catalog`.
    pub fn from_json_with_catalog(
        bytes: &[u8],
        catalog: Option<&Arc<ClassCatalog>>,
    ) -> Result<Self, GraphError> {
        let file: GraphFile =
            serde_json::from_slice(bytes).map_err(|e| GraphError::Malformed(e.to_string()))?;
        file.into_graph(SCENE_SCHEMA, catalog)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        Self::from_json(&std::fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}
