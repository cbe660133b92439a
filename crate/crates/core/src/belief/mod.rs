//! Belief scene graphs: a partial graph plus blind nodes for the objects the
//! model expects but that have not been observed.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::catalog::ClassCatalog;
use crate::ceci::{predict_histograms, CeciModel};
use crate::error::{BeliefError, GraphError};
use crate::graph::json::{to_canonical_bytes, BeliefRecord, GraphFile};
use crate::graph::{Histogram, Layer, NodeId, SceneEdge, SceneGraph, SceneNode};

pub const BELIEF_SCHEMA: &str = "bsg-belief/1";

/// How real-valued predicted counts become whole blind nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    /// Round half away from zero.
    #[default]
    Nearest,
    Floor,
}

impl Rounding {
    pub fn apply(self, x: f64) -> u64 {
        let r = match self {
            Rounding::Nearest => x.round(),
            Rounding::Floor => x.floor(),
        };
        r.max(0.0) as u64
    }
}

/// Which blind nodes are inserted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum BlindMode {
    /// Every class: rounded prediction minus observed count, floored at 0.
    #[default]
    Difference,
    /// Only the `k` most expected unseen classes of each room; each gets its
    /// rounded predicted count, at least one node.
    TopKOnly { k: usize },
}

/// Denominator of the shares reported by [`top_k_unseen`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareBase {
    /// Percent of the room's full predicted distribution.
    #[default]
    AllClasses,
    /// Percent of the predicted mass on unseen classes only.
    UnseenOnly,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BsgOptions {
    pub rounding: Rounding,
    pub mode: BlindMode,
    pub share_base: ShareBase,
}

/// Predicted counts for one masked node and the distribution derived from them.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeBelief {
    pub counts: Vec<f64>,
    pub distribution: Vec<f64>,
}

impl NodeBelief {
    pub fn from_counts(counts: Vec<f64>) -> Self {
        let total: f64 = counts.iter().sum();
        let distribution = if total > 0.0 {
            counts.iter().map(|c| c / total).collect()
        } else {
            vec![0.0; counts.len()]
        };
        Self { counts, distribution }
    }
}

/// One entry of a room's most-expected unseen objects.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnseenShare {
    pub class: String,
    pub index: usize,
    /// Percentage, 0–100.
    pub share: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeliefSceneGraph {
    base: SceneGraph,
    graph: SceneGraph,
    beliefs: BTreeMap<NodeId, NodeBelief>,
}

fn blind_id(room: &NodeId, class: usize, k: u64) -> NodeId {
    NodeId::new(format!("{room}/blind-{class:02}-{k:03}"))
}

fn check_beliefs(partial: &SceneGraph, beliefs: &BTreeMap<NodeId, Vec<f64>>) -> Result<(), BeliefError> {
    let n = partial.catalog().len();
    let masked = partial.masked_ids();
    for id in &masked {
        let row = beliefs
            .get(id)
            .ok_or_else(|| BeliefError::Mismatch(format!("no belief for masked node {id}")))?;
        if row.len() != n {
            return Err(BeliefError::Mismatch(format!("belief for {id} has {} classes, expected {n}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(BeliefError::Mismatch(format!("belief for {id} has a negative or non-finite entry")));
        }
    }
    if let Some(extra) = beliefs.keys().find(|k| !masked.contains(k)) {
        return Err(BeliefError::Mismatch(format!("belief for {extra}, which is not a masked node")));
    }
    Ok(())
}

fn shares(counts: &[f64], observed: &Histogram, base: ShareBase) -> Vec<(usize, f64)> {
    let total: f64 = match base {
        ShareBase::AllClasses => counts.iter().sum(),
        ShareBase::UnseenOnly => counts.iter().enumerate().filter(|(i, _)| observed.get(*i) == 0).map(|(_, c)| c).sum(),
    };
    if total <= 0.0 {
        return Vec::new();
    }
    let mut out: Vec<(usize, f64)> = counts
        .iter()
        .enumerate()
        .filter(|&(i, &c)| observed.get(i) == 0 && c > 0.0)
        .map(|(i, &c)| (i, 100.0 * c / total))
        .collect();
    // share descending, catalog order on ties
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

/// The `k` unseen classes (observed count 0) with the highest predicted share.
pub fn top_k_unseen(
    room: &NodeId,
    beliefs: &BTreeMap<NodeId, Vec<f64>>,
    observed: &Histogram,
    k: usize,
    base: ShareBase,
    catalog: &ClassCatalog,
) -> Result<Vec<UnseenShare>, BeliefError> {
    if k == 0 {
        return Err(BeliefError::ZeroK);
    }
    let counts = beliefs.get(room).ok_or_else(|| BeliefError::UnknownRoom(room.clone()))?;
    if counts.len() != catalog.len() || observed.counts().len() != catalog.len() {
        return Err(BeliefError::Mismatch(format!("room {room}: class count differs from catalog")));
    }
    Ok(shares(counts, observed, base)
        .into_iter()
        .take(k)
        .map(|(index, share)| UnseenShare {
            class: catalog.label(index).unwrap_or_default().to_owned(),
            index,
            share,
        })
        .collect())
}

/// Adds blind nodes under every room of `partial` according to `options.mode`.
pub fn blind_nodes_by_difference(
    partial: &SceneGraph,
    beliefs: &BTreeMap<NodeId, Vec<f64>>,
    options: &BsgOptions,
) -> Result<BeliefSceneGraph, BeliefError> {
    if partial.blind_nodes().next().is_some() {
        return Err(BeliefError::Mismatch("partial graph already contains blind nodes".into()));
    }
    let report = partial.validate();
    if !report.is_empty() {
        return Err(GraphError::Invalid(report).into());
    }
    check_beliefs(partial, beliefs)?;
    let catalog = partial.catalog();
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for room in partial.room_ids() {
        let observed = partial.node_histogram(&room, false)?;
        let predicted = &beliefs[&room];
        let wanted: Vec<(usize, u64)> = match options.mode {
            BlindMode::Difference => (0..catalog.len())
                .map(|i| (i, options.rounding.apply(predicted[i]).saturating_sub(observed.get(i))))
                .collect(),
            BlindMode::TopKOnly { k } => {
                if k == 0 {
                    return Err(BeliefError::ZeroK);
                }
                shares(predicted, &observed, options.share_base)
                    .into_iter()
                    .take(k)
                    .map(|(i, _)| (i, options.rounding.apply(predicted[i]).max(1)))
                    .collect()
            }
        };
        for (i, count) in wanted {
            for k in 0..count {
                let id = blind_id(&room, i, k);
                if partial.node(&id).is_some() {
                    return Err(BeliefError::Mismatch(format!("node id {id} already used in partial graph")));
                }
                nodes.push(SceneNode::blind(id.clone(), catalog.label(i).unwrap_or_default()));
                edges.push(SceneEdge::contains(room.clone(), id));
            }
        }
    }
    let graph = partial.extended(nodes, edges);
    let report = graph.validate();
    if !report.is_empty() {
        return Err(GraphError::Invalid(report).into());
    }
    let beliefs = beliefs
        .iter()
        .map(|(id, c)| (id.clone(), NodeBelief::from_counts(c.clone())))
        .collect();
    Ok(BeliefSceneGraph {
        base: partial.clone(),
        graph,
        beliefs,
    })
}

/// Predicts histograms for `partial` and inserts blind nodes.
pub fn build_bsg(partial: &SceneGraph, model: &CeciModel, options: &BsgOptions) -> Result<BeliefSceneGraph, BeliefError> {
    let beliefs = predict_histograms(model, partial, partial.catalog())?;
    blind_nodes_by_difference(partial, &beliefs, options)
}

/// Removes every blind node and its edges.
pub fn strip_blind(graph: &SceneGraph) -> SceneGraph {
    graph.filter_nodes(|n| n.layer != Layer::Blind)
}

/// One row of the per-room unseen-object table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TopKRow {
    pub room: NodeId,
    pub rank: usize,
    pub class: String,
    pub share: f64,
}

impl BeliefSceneGraph {
    /// The partial graph the beliefs were built on.
    pub fn base(&self) -> &SceneGraph {
        &self.base
    }

    /// Base plus blind nodes.
    pub fn graph(&self) -> &SceneGraph {
        &self.graph
    }

    pub fn beliefs(&self) -> &BTreeMap<NodeId, NodeBelief> {
        &self.beliefs
    }

    pub fn belief_counts(&self) -> BTreeMap<NodeId, Vec<f64>> {
        self.beliefs.iter().map(|(k, v)| (k.clone(), v.counts.clone())).collect()
    }

    pub fn blind_count(&self) -> usize {
        self.graph.blind_nodes().count()
    }

    /// Blind-node counts per class for each room.
    pub fn blind_histograms(&self) -> Result<BTreeMap<NodeId, Histogram>, BeliefError> {
        let mut out = BTreeMap::new();
        for room in self.base.room_ids() {
            let with = self.graph.node_histogram(&room, true)?;
            let without = self.graph.node_histogram(&room, false)?;
            let diff = with.counts().iter().zip(without.counts()).map(|(a, b)| a - b).collect();
            out.insert(room, Histogram::from_counts(diff));
        }
        Ok(out)
    }

    pub fn strip_blind(&self) -> SceneGraph {
        strip_blind(&self.graph)
    }

    pub fn top_k_unseen(&self, room: &NodeId, k: usize, base: ShareBase) -> Result<Vec<UnseenShare>, BeliefError> {
        if self.base.node(room).map(|n| n.layer) != Some(Layer::Room) {
            return Err(BeliefError::UnknownRoom(room.clone()));
        }
        let observed = self.base.node_histogram(room, false)?;
        top_k_unseen(room, &self.belief_counts(), &observed, k, base, self.base.catalog())
    }

    /// Top-`k` unseen table over all rooms in id order.
    pub fn top_k_table(&self, k: usize, base: ShareBase) -> Result<Vec<TopKRow>, BeliefError> {
        let mut rows = Vec::new();
        for room in self.base.room_ids() {
            for (rank, s) in self.top_k_unseen(&room, k, base)?.into_iter().enumerate() {
                rows.push(TopKRow {
                    room: room.clone(),
                    rank: rank + 1,
                    class: s.class,
                    share: s.share,
                });
            }
        }
        Ok(rows)
    }

    pub fn to_json(&self) -> Result<Vec<u8>, BeliefError> {
        let mut file = GraphFile::from_graph(&self.graph, BELIEF_SCHEMA);
        file.beliefs = Some(
            self.beliefs
                .iter()
                .map(|(id, b)| {
                    (
                        id.clone(),
                        BeliefRecord {
                            counts: b.counts.clone(),
                            distribution: b.distribution.clone(),
                        },
                    )
                })
                .collect(),
        );
        Ok(to_canonical_bytes(&file).map_err(GraphError::from)?)
    }

    pub fn from_json(bytes: &[u8], catalog: Option<&Arc<ClassCatalog>>) -> Result<Self, BeliefError> {
        let mut file: GraphFile =
            serde_json::from_slice(bytes).map_err(|e| GraphError::Malformed(e.to_string()))?;
        let records = file
            .beliefs
            .take()
            .ok_or_else(|| BeliefError::Mismatch("belief graph file has no beliefs section".into()))?;
        let graph = file.into_graph(BELIEF_SCHEMA, catalog)?;
        let base = strip_blind(&graph);
        let counts: BTreeMap<NodeId, Vec<f64>> = records.iter().map(|(k, v)| (k.clone(), v.counts.clone())).collect();
        check_beliefs(&base, &counts)?;
        let beliefs = records
            .into_iter()
            .map(|(id, r)| {
                let derived = NodeBelief::from_counts(r.counts);
                if derived.distribution.len() != r.distribution.len()
                    || derived.distribution.iter().zip(&r.distribution).any(|(a, b)| (a - b).abs() > 1e-9)
                {
                    return Err(BeliefError::Mismatch(format!("distribution for {id} does not match its counts")));
                }
                Ok((id, derived))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { base, graph, beliefs })
    }

    pub fn read(path: impl AsRef<Path>, catalog: Option<&Arc<ClassCatalog>>) -> Result<Self, BeliefError> {
        Self::from_json(&std::fs::read(path).map_err(GraphError::from)?, catalog)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), BeliefError> {
        std::fs::write(path, self.to_json()?).map_err(GraphError::from)?;
        Ok(())
    }
}
