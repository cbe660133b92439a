use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::RoomGraph;
use crate::dataset::degrade;
use crate::error::SearchError;
use crate::graph::{Layer, NodeId, SceneEdge, SceneGraph};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    /// Stop at the first artifact instance.
    Single,
    /// Stop once every instance has been found.
    Multi,
}

impl std::fmt::Display for SearchMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SearchMode::Single => "single",
            SearchMode::Multi => "multi",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Probability of adding each non-tree room pair as an extra edge.
    pub extra_edge_density: f64,
    pub cost_min: f64,
    pub cost_max: f64,
    /// Fraction of objects hidden in the initially revealed graph.
    pub hidden_fraction: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            extra_edge_density: 0.2,
            cost_min: 1.0,
            cost_max: 10.0,
            hidden_fraction: 0.5,
        }
    }
}

impl EnvConfig {
    pub fn check(&self) -> Result<(), SearchError> {
        if !(0.0..=1.0).contains(&self.extra_edge_density) {
            return Err(SearchError::InvalidEnv(format!("edge density {}", self.extra_edge_density)));
        }
        if !(self.cost_min >= 0.0 && self.cost_max >= self.cost_min && self.cost_max.is_finite()) {
            return Err(SearchError::InvalidEnv(format!(
                "cost range [{}, {}]",
                self.cost_min, self.cost_max
            )));
        }
        if !(0.0..1.0).contains(&self.hidden_fraction) {
            return Err(SearchError::InvalidEnv(format!("hidden fraction {}", self.hidden_fraction)));
        }
        Ok(())
    }
}

/// Replaces the traversal edges of `graph` with a random connected room graph:
/// a random spanning tree plus extra pairs with probability `extra_edge_density`,
/// costs uniform on `[cost_min, cost_max]`.
pub fn add_random_traversal(graph: &SceneGraph, config: &EnvConfig, seed: u64) -> Result<SceneGraph, SearchError> {
    config.check()?;
    let mut rng = rng::derive(seed, "traversal");
    let mut rooms = graph.room_ids();
    rooms.shuffle(&mut rng);
    let cost = |rng: &mut rng::Rng| {
        if config.cost_max > config.cost_min {
            rng.gen_range(config.cost_min..=config.cost_max)
        } else {
            config.cost_min
        }
    };
    let mut pairs = BTreeSet::new();
    let mut edges = Vec::new();
    for i in 1..rooms.len() {
        let j = rng.gen_range(0..i);
        let (a, b) = if rooms[i] < rooms[j] { (i, j) } else { (j, i) };
        pairs.insert((rooms[a].clone(), rooms[b].clone()));
        edges.push(SceneEdge::traversal(rooms[a].clone(), rooms[b].clone(), cost(&mut rng)));
    }
    let mut sorted = rooms.clone();
    sorted.sort();
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            let key = (sorted[i].clone(), sorted[j].clone());
            if !pairs.contains(&key) && rng.gen_bool(config.extra_edge_density) {
                edges.push(SceneEdge::traversal(key.0.clone(), key.1.clone(), cost(&mut rng)));
                pairs.insert(key);
            }
        }
    }
    Ok(graph.with_traversal_edges(edges))
}

/// A partially known environment for one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchEnv {
    /// Hidden ground truth with traversal edges.
    pub truth: SceneGraph,
    /// What the robot knows at the start: rooms, traversal edges and a
    /// subset of objects, with no artifact instances.
    pub revealed: SceneGraph,
    pub alpha: String,
    pub start: NodeId,
    pub mode: SearchMode,
}

fn alpha_count(graph: &SceneGraph, room: &NodeId, alpha: usize) -> u64 {
    graph.node_histogram(room, false).map_or(0, |h| h.get(alpha))
}

impl SearchEnv {
    pub fn alpha_index(&self) -> Result<usize, SearchError> {
        self.truth
            .catalog()
            .index_of(&self.alpha)
            .ok_or_else(|| SearchError::InvalidEnv(format!("artifact class {:?} not in catalog", self.alpha)))
    }

    /// Rooms of `truth` containing the artifact.
    pub fn artifact_rooms(&self) -> Result<Vec<NodeId>, SearchError> {
        let a = self.alpha_index()?;
        Ok(self
            .truth
            .room_ids()
            .into_iter()
            .filter(|r| alpha_count(&self.truth, r, a) > 0)
            .collect())
    }

    pub fn instance_count(&self) -> Result<u64, SearchError> {
        let a = self.alpha_index()?;
        Ok(self.truth.room_ids().iter().map(|r| alpha_count(&self.truth, r, a)).sum())
    }

    /// Builds an environment: hides objects of `truth` with `seed`, removes
    /// every artifact instance from the revealed graph.
    pub fn new(
        truth: SceneGraph,
        alpha: &str,
        start: NodeId,
        mode: SearchMode,
        hidden_fraction: f64,
        seed: u64,
    ) -> Result<Self, SearchError> {
        let partial = degrade(&truth, seed, hidden_fraction)
            .map_err(|e| SearchError::InvalidEnv(format!("cannot hide objects: {e}")))?;
        let revealed = partial.filter_nodes(|n| !(n.layer == Layer::Object && n.class_label == alpha));
        let env = Self {
            truth,
            revealed,
            alpha: alpha.to_owned(),
            start,
            mode,
        };
        env.check()?;
        Ok(env)
    }

    /// Checks the environment invariants.
    pub fn check(&self) -> Result<(), SearchError> {
        for g in [&self.truth, &self.revealed] {
            let report = g.validate();
            if !report.is_empty() {
                return Err(SearchError::Graph(crate::error::GraphError::Invalid(report)));
            }
        }
        RoomGraph::from_scene(&self.truth)?;
        let a = self.alpha_index()?;
        if self.instance_count()? == 0 {
            return Err(SearchError::InvalidEnv(format!("no {:?} in the environment", self.alpha)));
        }
        if self.truth.node(&self.start).map(|n| n.layer) != Some(Layer::Room) {
            return Err(SearchError::InvalidEnv(format!("start {} is not a room", self.start)));
        }
        if alpha_count(&self.truth, &self.start, a) > 0 {
            return Err(SearchError::InvalidEnv(format!("start room {} contains the artifact", self.start)));
        }
        if self.revealed.room_ids() != self.truth.room_ids() {
            return Err(SearchError::InvalidEnv("revealed rooms differ from the environment".into()));
        }
        if self.revealed.traversal_edges().ne(self.truth.traversal_edges()) {
            return Err(SearchError::InvalidEnv("revealed traversal edges differ from the environment".into()));
        }
        for o in self.revealed.objects() {
            if o.class_label == self.alpha {
                return Err(SearchError::InvalidEnv(format!("artifact {} already revealed", o.id)));
            }
            let same = self.truth.node(&o.id).is_some_and(|t| t == o)
                && self.truth.parent(&o.id) == self.revealed.parent(&o.id);
            if !same {
                return Err(SearchError::InvalidEnv(format!("revealed object {} not in the environment", o.id)));
            }
        }
        Ok(())
    }
}
