use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{dijkstra, shortest_path, PathInfo, RoomGraph, SearchEnv};
use crate::error::{Error, SearchError};
use crate::graph::{Layer, NodeId, SceneEdge, SceneGraph, SceneNode};
use crate::metrics::BeliefSource;

/// How the next room is chosen.
#[derive(Clone, Copy)]
pub enum Planner<'a> {
    /// Nearest unexplored room.
    Baseline,
    /// Unexplored room with the largest predicted artifact share.
    Bsg(&'a dyn BeliefSource),
}

impl Planner<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Planner::Baseline => "baseline",
            Planner::Bsg(_) => "bsg",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeOptions {
    /// Rooms crossed on the way to the chosen room are explored as well.
    pub pass_through: bool,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self { pass_through: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub planner: String,
    /// Rooms entered in order, starting with the start room. With pass-through
    /// every room on every path is listed (re-entries included); otherwise only
    /// the chosen rooms.
    pub visited: Vec<NodeId>,
    pub cost: f64,
    pub success: bool,
    pub found: u64,
    pub required: u64,
    /// Number of planner decisions.
    pub decisions: usize,
}

fn nearest_first<'a>(
    dist: &'a BTreeMap<NodeId, PathInfo>,
    candidates: &'a BTreeSet<NodeId>,
) -> impl Iterator<Item = (f64, NodeId)> + 'a {
    candidates
        .iter()
        .filter_map(|r| dist.get(r).filter(|p| p.distance.is_finite()).map(|p| (p.distance, r.clone())))
}

/// Unexplored room with the smallest distance; ties by id.
pub fn baseline_step(dist: &BTreeMap<NodeId, PathInfo>, unexplored: &BTreeSet<NodeId>) -> Option<NodeId> {
    nearest_first(dist, unexplored)
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)))
        .map(|(_, r)| r)
}

/// Unexplored room with the largest artifact share; ties by distance, then id.
pub fn bsg_step(
    dist: &BTreeMap<NodeId, PathInfo>,
    unexplored: &BTreeSet<NodeId>,
    shares: &BTreeMap<NodeId, f64>,
) -> Option<NodeId> {
    nearest_first(dist, unexplored)
        .map(|(d, r)| (shares.get(&r).copied().unwrap_or(0.0), d, r))
        .min_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)).then_with(|| a.2.cmp(&b.2)))
        .map(|(_, _, r)| r)
}

/// Normalized predicted share of class `alpha` for every room of `revealed`.
/// Predictions use the containment-only view of the graph.
pub fn alpha_shares(
    source: &dyn BeliefSource,
    revealed: &SceneGraph,
    truth: &SceneGraph,
    alpha: usize,
) -> Result<BTreeMap<NodeId, f64>, Error> {
    let beliefs = source.histograms(&revealed.without_traversal(), &truth.without_traversal())?;
    Ok(revealed
        .room_ids()
        .into_iter()
        .map(|r| {
            let share = beliefs.get(&r).map_or(0.0, |counts| {
                let total: f64 = counts.iter().sum();
                if total > 0.0 {
                    counts[alpha] / total
                } else {
                    0.0
                }
            });
            (r, share)
        })
        .collect())
}

struct State<'e> {
    env: &'e SearchEnv,
    alpha: usize,
    revealed: SceneGraph,
    explored: BTreeSet<NodeId>,
    found: u64,
}

impl State<'_> {
    fn explore(&mut self, room: &NodeId) -> Result<(), SearchError> {
        if !self.explored.insert(room.clone()) {
            return Ok(());
        }
        let mut nodes: Vec<SceneNode> = Vec::new();
        let mut edges = Vec::new();
        for o in self.env.truth.children(room).filter(|n| n.layer == Layer::Object) {
            if o.class_label == self.env.alpha {
                self.found += 1;
            }
            if self.revealed.node(&o.id).is_none() {
                nodes.push(o.clone());
                edges.push(SceneEdge::contains(room.clone(), o.id.clone()));
            }
        }
        if !nodes.is_empty() {
            self.revealed = self.revealed.extended(nodes, edges);
        }
        Ok(())
    }
}

/// [`run_episode`], also returning the revealed graph at the end.
pub fn run_episode_traced(
    env: &SearchEnv,
    planner: Planner<'_>,
    options: &EpisodeOptions,
) -> Result<(EpisodeResult, SceneGraph), Error> {
    env.check()?;
    let rooms = RoomGraph::from_scene(&env.truth)?;
    let alpha = env.alpha_index()?;
    let required = match env.mode {
        super::SearchMode::Single => 1,
        super::SearchMode::Multi => env.instance_count()?,
    };
    let mut st = State {
        env,
        alpha,
        revealed: env.revealed.clone(),
        explored: BTreeSet::new(),
        found: 0,
    };
    st.explore(&env.start)?;
    let mut current = env.start.clone();
    let mut visited = vec![current.clone()];
    let mut cost = 0.0;
    let mut decisions = 0;
    let all: BTreeSet<NodeId> = env.truth.room_ids().into_iter().collect();
    'outer: while st.found < required {
        let dist = dijkstra(&rooms, &current)?;
        let unexplored: BTreeSet<NodeId> = all.difference(&st.explored).cloned().collect();
        let target = match planner {
            Planner::Baseline => baseline_step(&dist, &unexplored),
            Planner::Bsg(source) => {
                let shares = alpha_shares(source, &st.revealed, &env.truth, st.alpha)?;
                bsg_step(&dist, &unexplored, &shares)
            }
        };
        let Some(target) = target else { break };
        decisions += 1;
        let path = shortest_path(&dist, &current, &target).expect("target reachable");
        let leg_start = cost;
        for hop in &path[1..] {
            cost = leg_start + dist[hop].distance;
            if options.pass_through || *hop == target {
                visited.push(hop.clone());
                st.explore(hop)?;
            }
            if st.found >= required {
                break 'outer;
            }
        }
        current = target;
    }
    let result = EpisodeResult {
        planner: planner.name().to_owned(),
        visited,
        cost,
        success: st.found >= required,
        found: st.found,
        required,
        decisions,
    };
    Ok((result, st.revealed))
}

/// Runs one episode until the artifact condition is met or every reachable
/// room has been explored.
pub fn run_episode(env: &SearchEnv, planner: Planner<'_>, options: &EpisodeOptions) -> Result<EpisodeResult, Error> {
    run_episode_traced(env, planner, options).map(|(r, _)| r)
}
