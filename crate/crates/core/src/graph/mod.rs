//! Layered scene graphs: one building, its rooms, and the objects inside them.

mod histogram;
pub mod json;
mod validate;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::catalog::ClassCatalog;
use crate::error::GraphError;

pub use histogram::Histogram;
pub use validate::{Rule, ValidationReport, Violation};

/// Label carried by every room node.
pub const ROOM_LABEL: &str = "room";
/// Label carried by the building node.
pub const BUILDING_LABEL: &str = "building";

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Layer {
    Building,
    Room,
    Object,
    Blind,
}

impl Layer {
    /// Building and room nodes are the ones the graph network operates on.
    pub fn is_masked(self) -> bool {
        matches!(self, Layer::Building | Layer::Room)
    }

    pub fn is_leaf(self) -> bool {
        matches!(self, Layer::Object | Layer::Blind)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneNode {
    pub id: NodeId,
    pub layer: Layer,
    pub class_label: String,
    pub attributes: BTreeMap<String, f64>,
}

impl SceneNode {
    pub fn new(id: impl Into<NodeId>, layer: Layer, class_label: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            layer,
            class_label: class_label.into(),
            attributes: BTreeMap::new(),
        }
    }

    pub fn building(id: impl Into<NodeId>) -> Self {
        Self::new(id, Layer::Building, BUILDING_LABEL)
    }

    pub fn room(id: impl Into<NodeId>) -> Self {
        Self::new(id, Layer::Room, ROOM_LABEL)
    }

    pub fn object(id: impl Into<NodeId>, class_label: impl Into<String>) -> Self {
        Self::new(id, Layer::Object, class_label)
    }

    pub fn blind(id: impl Into<NodeId>, class_label: impl Into<String>) -> Self {
        Self::new(id, Layer::Blind, class_label)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    Contains,
    Traversal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneEdge {
    pub from: NodeId,
    pub to: NodeId,
    pub kind: EdgeKind,
    /// Present iff `kind` is `Traversal`.
    pub cost: Option<f64>,
}

impl SceneEdge {
    pub fn contains(from: impl Into<NodeId>, to: impl Into<NodeId>) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            kind: EdgeKind::Contains,
            cost: None,
        }
    }

    pub fn traversal(from: impl Into<NodeId>, to: impl Into<NodeId>, cost: f64) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            kind: EdgeKind::Traversal,
            cost: Some(cost),
        }
    }

    fn sort_key(&self) -> (&NodeId, &NodeId, EdgeKind) {
        (&self.from, &self.to, self.kind)
    }
}

/// Immutable scene graph in canonical order: nodes sorted by id, edges by
/// `(from, to, kind)`.
///
/// Construction does not validate; use [`SceneGraph::validated`] or
/// [`SceneGraph::validate`] to check the structural rules.
#[derive(Clone)]
pub struct SceneGraph {
    catalog: Arc<ClassCatalog>,
    nodes: Vec<SceneNode>,
    edges: Vec<SceneEdge>,
    lookup: HashMap<NodeId, usize>,
    children: HashMap<NodeId, Vec<usize>>,
    parents: HashMap<NodeId, Vec<NodeId>>,
}

impl SceneGraph {
    pub fn from_parts(
        catalog: Arc<ClassCatalog>,
        mut nodes: Vec<SceneNode>,
        mut edges: Vec<SceneEdge>,
    ) -> Self {
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        edges.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        let mut lookup = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            lookup.entry(n.id.clone()).or_insert(i);
        }
        let mut children: HashMap<NodeId, Vec<usize>> = HashMap::new();
        let mut parents: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
        for e in edges.iter().filter(|e| e.kind == EdgeKind::Contains) {
            if let Some(&ci) = lookup.get(&e.to) {
                children.entry(e.from.clone()).or_default().push(ci);
            }
            parents.entry(e.to.clone()).or_default().push(e.from.clone());
        }
        Self {
            catalog,
            nodes,
            edges,
            lookup,
            children,
            parents,
        }
    }

    /// Builds and validates, returning the full report on failure.
    pub fn validated(
        catalog: Arc<ClassCatalog>,
        nodes: Vec<SceneNode>,
        edges: Vec<SceneEdge>,
    ) -> Result<Self, GraphError> {
        let g = Self::from_parts(catalog, nodes, edges);
        let report = g.validate();
        if report.is_empty() {
            Ok(g)
        } else {
            Err(GraphError::Invalid(report))
        }
    }

    pub fn builder(catalog: Arc<ClassCatalog>) -> SceneGraphBuilder {
        SceneGraphBuilder::new(catalog)
    }

    pub fn catalog(&self) -> &ClassCatalog {
        &self.catalog
    }

    pub fn catalog_arc(&self) -> &Arc<ClassCatalog> {
        &self.catalog
    }

    pub fn nodes(&self) -> &[SceneNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[SceneEdge] {
        &self.edges
    }

    pub fn node(&self, id: &NodeId) -> Option<&SceneNode> {
        self.lookup.get(id).map(|&i| &self.nodes[i])
    }

    pub fn building(&self) -> Option<&SceneNode> {
        self.nodes.iter().find(|n| n.layer == Layer::Building)
    }

    /// Rooms in id order.
    pub fn rooms(&self) -> impl Iterator<Item = &SceneNode> {
        self.nodes.iter().filter(|n| n.layer == Layer::Room)
    }

    pub fn room_ids(&self) -> Vec<NodeId> {
        self.rooms().map(|n| n.id.clone()).collect()
    }

    pub fn objects(&self) -> impl Iterator<Item = &SceneNode> {
        self.nodes.iter().filter(|n| n.layer == Layer::Object)
    }

    pub fn blind_nodes(&self) -> impl Iterator<Item = &SceneNode> {
        self.nodes.iter().filter(|n| n.layer == Layer::Blind)
    }

    pub fn object_count(&self) -> usize {
        self.objects().count()
    }

    /// Building first, then rooms in id order: the row order of every feature matrix.
    pub fn masked_ids(&self) -> Vec<NodeId> {
        self.building()
            .into_iter()
            .chain(self.rooms())
            .map(|n| n.id.clone())
            .collect()
    }

    /// Targets of `Contains` edges leaving `id`.
    pub fn children(&self, id: &NodeId) -> impl Iterator<Item = &SceneNode> {
        self.children
            .get(id)
            .into_iter()
            .flatten()
            .map(|&i| &self.nodes[i])
    }

    pub fn parents(&self, id: &NodeId) -> &[NodeId] {
        self.parents.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The single containing node, if there is exactly one.
    pub fn parent(&self, id: &NodeId) -> Option<&NodeId> {
        match self.parents(id) {
            [p] => Some(p),
            _ => None,
        }
    }

    pub fn traversal_edges(&self) -> impl Iterator<Item = &SceneEdge> {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Traversal)
    }

    pub fn validate(&self) -> ValidationReport {
        validate::validate(self)
    }

    /// Per-class object counts under a room, or summed over all rooms for the building.
    pub fn node_histogram(&self, id: &NodeId, include_blind: bool) -> Result<Histogram, GraphError> {
        let node = self
            .node(id)
            .ok_or_else(|| GraphError::UnknownNode(id.clone()))?;
        let mut hist = Histogram::zeros(self.catalog.len());
        match node.layer {
            Layer::Room => self.accumulate_room(id, include_blind, &mut hist),
            Layer::Building => {
                for room in self.children(id).filter(|n| n.layer == Layer::Room) {
                    self.accumulate_room(&room.id, include_blind, &mut hist);
                }
            }
            layer => {
                return Err(GraphError::NotMasked {
                    id: id.clone(),
                    layer,
                })
            }
        }
        Ok(hist)
    }

    fn accumulate_room(&self, room: &NodeId, include_blind: bool, hist: &mut Histogram) {
        for child in self.children(room) {
            let counted = match child.layer {
                Layer::Object => true,
                Layer::Blind => include_blind,
                _ => false,
            };
            if counted {
                if let Some(i) = self.catalog.index_of(&child.class_label) {
                    hist.add(i, 1);
                }
            }
        }
    }

    /// Copy of the graph keeping only the nodes (and incident edges) accepted by `keep`.
    pub fn filter_nodes(&self, mut keep: impl FnMut(&SceneNode) -> bool) -> SceneGraph {
        let nodes: Vec<SceneNode> = self.nodes.iter().filter(|n| keep(n)).cloned().collect();
        let kept: std::collections::HashSet<&NodeId> = nodes.iter().map(|n| &n.id).collect();
        let edges = self
            .edges
            .iter()
            .filter(|e| kept.contains(&e.from) && kept.contains(&e.to))
            .cloned()
            .collect();
        SceneGraph::from_parts(self.catalog.clone(), nodes, edges)
    }

    /// Copy with extra nodes and edges appended.
    pub fn extended(&self, nodes: Vec<SceneNode>, edges: Vec<SceneEdge>) -> SceneGraph {
        let mut all_nodes = self.nodes.clone();
        all_nodes.extend(nodes);
        let mut all_edges = self.edges.clone();
        all_edges.extend(edges);
        SceneGraph::from_parts(self.catalog.clone(), all_nodes, all_edges)
    }

    /// Copy with all traversal edges replaced.
    pub fn with_traversal_edges(&self, traversal: Vec<SceneEdge>) -> SceneGraph {
        let mut edges: Vec<SceneEdge> = self
            .edges
            .iter()
            .filter(|e| e.kind != EdgeKind::Traversal)
            .cloned()
            .collect();
        edges.extend(traversal);
        SceneGraph::from_parts(self.catalog.clone(), self.nodes.clone(), edges)
    }

    /// The containment skeleton plus objects, without traversal edges.
    pub fn without_traversal(&self) -> SceneGraph {
        self.with_traversal_edges(Vec::new())
    }
}

impl PartialEq for SceneGraph {
    fn eq(&self, other: &Self) -> bool {
        self.catalog.labels() == other.catalog.labels()
            && self.nodes == other.nodes
            && self.edges == other.edges
    }
}

impl fmt::Debug for SceneGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SceneGraph")
            .field("nodes", &self.nodes.len())
            .field("edges", &self.edges.len())
            .field("rooms", &self.rooms().count())
            .field("objects", &self.object_count())
            .finish()
    }
}

/// Incremental construction of a [`SceneGraph`].
pub struct SceneGraphBuilder {
    catalog: Arc<ClassCatalog>,
    nodes: Vec<SceneNode>,
    edges: Vec<SceneEdge>,
}

impl SceneGraphBuilder {
    pub fn new(catalog: Arc<ClassCatalog>) -> Self {
        Self {
            catalog,
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn building(mut self, id: impl Into<NodeId>) -> Self {
        self.nodes.push(SceneNode::building(id));
        self
    }

    /// Adds a room contained in `building`.
    pub fn room(mut self, building: impl Into<NodeId>, id: impl Into<NodeId>) -> Self {
        let id = id.into();
        self.edges.push(SceneEdge::contains(building, id.clone()));
        self.nodes.push(SceneNode::room(id));
        self
    }

    pub fn object(
        mut self,
        room: impl Into<NodeId>,
        id: impl Into<NodeId>,
        class_label: impl Into<String>,
    ) -> Self {
        let id = id.into();
        self.edges.push(SceneEdge::contains(room, id.clone()));
        self.nodes.push(SceneNode::object(id, class_label));
        self
    }

    pub fn blind(
        mut self,
        room: impl Into<NodeId>,
        id: impl Into<NodeId>,
        class_label: impl Into<String>,
    ) -> Self {
        let id = id.into();
        self.edges.push(SceneEdge::contains(room, id.clone()));
        self.nodes.push(SceneNode::blind(id, class_label));
        self
    }

    pub fn traversal(mut self, a: impl Into<NodeId>, b: impl Into<NodeId>, cost: f64) -> Self {
        self.edges.push(SceneEdge::traversal(a, b, cost));
        self
    }

    pub fn node(mut self, node: SceneNode) -> Self {
        self.nodes.push(node);
        self
    }

    pub fn edge(mut self, edge: SceneEdge) -> Self {
        self.edges.push(edge);
        self
    }

    pub fn build(self) -> Result<SceneGraph, GraphError> {
        SceneGraph::validated(self.catalog, self.nodes, self.edges)
    }

    pub fn build_unchecked(self) -> SceneGraph {
        SceneGraph::from_parts(self.catalog, self.nodes, self.edges)
    }
}
