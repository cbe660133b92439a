//! Object-search simulation: a nearest-room baseline against a planner that
//! visits the room with the highest predicted share of the artifact class.

mod batch;
mod env;
mod episode;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use crate::error::SearchError;
use crate::graph::{Layer, NodeId, SceneGraph};

pub use batch::{batch_eval, paired_bootstrap, percentage_reduction, BatchConfig, BatchReport, EpisodeRecord, ModeReport};
pub use env::{add_random_traversal, EnvConfig, SearchEnv, SearchMode};
pub use episode::{
    alpha_shares, baseline_step, bsg_step, run_episode, run_episode_traced, EpisodeOptions, EpisodeResult, Planner,
};

/// Room-to-room traversal edges with their costs.
#[derive(Clone, Debug, PartialEq)]
pub struct RoomGraph {
    adjacency: BTreeMap<NodeId, Vec<(NodeId, f64)>>,
}

impl RoomGraph {
    /// Collects Room↔Room traversal edges of `graph`; every room is a vertex.
    pub fn from_scene(graph: &SceneGraph) -> Result<Self, SearchError> {
        let mut adjacency: BTreeMap<NodeId, Vec<(NodeId, f64)>> =
            graph.room_ids().into_iter().map(|r| (r, Vec::new())).collect();
        for e in graph.traversal_edges() {
            let is_room = |id: &NodeId| graph.node(id).map(|n| n.layer) == Some(Layer::Room);
            if !(is_room(&e.from) && is_room(&e.to)) {
                continue;
            }
            let cost = e.cost.unwrap_or(f64::NAN);
            if !(cost >= 0.0) {
                return Err(SearchError::NegativeCost {
                    from: e.from.clone(),
                    to: e.to.clone(),
                    cost,
                });
            }
            adjacency.get_mut(&e.from).expect("room").push((e.to.clone(), cost));
            adjacency.get_mut(&e.to).expect("room").push((e.from.clone(), cost));
        }
        for list in adjacency.values_mut() {
            list.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        }
        Ok(Self { adjacency })
    }

    /// Builds a graph directly from undirected weighted edges.
    pub fn from_edges(rooms: impl IntoIterator<Item = NodeId>, edges: &[(NodeId, NodeId, f64)]) -> Result<Self, SearchError> {
        let mut adjacency: BTreeMap<NodeId, Vec<(NodeId, f64)>> = rooms.into_iter().map(|r| (r, Vec::new())).collect();
        for (a, b, c) in edges {
            if !(*c >= 0.0) {
                return Err(SearchError::NegativeCost {
                    from: a.clone(),
                    to: b.clone(),
                    cost: *c,
                });
            }
            for (x, y) in [(a, b), (b, a)] {
                adjacency
                    .get_mut(x)
                    .ok_or_else(|| SearchError::InvalidEnv(format!("unknown room {x}")))?
                    .push((y.clone(), *c));
            }
        }
        for list in adjacency.values_mut() {
            list.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        }
        Ok(Self { adjacency })
    }

    pub fn rooms(&self) -> impl Iterator<Item = &NodeId> {
        self.adjacency.keys()
    }

    pub fn neighbors(&self, room: &NodeId) -> &[(NodeId, f64)] {
        self.adjacency.get(room).map_or(&[], Vec::as_slice)
    }

    pub fn contains(&self, room: &NodeId) -> bool {
        self.adjacency.contains_key(room)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathInfo {
    /// `f64::INFINITY` when unreachable.
    pub distance: f64,
    pub predecessor: Option<NodeId>,
}

#[derive(PartialEq)]
struct Entry(f64, NodeId);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (distance, id)
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest paths. Among equal-length paths the predecessor
/// with the smallest id wins.
pub fn dijkstra(graph: &RoomGraph, source: &NodeId) -> Result<BTreeMap<NodeId, PathInfo>, SearchError> {
    if !graph.contains(source) {
        return Err(SearchError::InvalidEnv(format!("unknown source room {source}")));
    }
    let mut info: BTreeMap<NodeId, PathInfo> = graph
        .rooms()
        .map(|r| {
            (
                r.clone(),
                PathInfo {
                    distance: f64::INFINITY,
                    predecessor: None,
                },
            )
        })
        .collect();
    let mut done: BTreeMap<&NodeId, bool> = graph.rooms().map(|r| (r, false)).collect();
    info.get_mut(source).expect("source").distance = 0.0;
    let mut heap = BinaryHeap::from([Entry(0.0, source.clone())]);
    while let Some(Entry(d, u)) = heap.pop() {
        if done[&u] || d > info[&u].distance {
            continue;
        }
        *done.get_mut(&u).expect("room") = true;
        for (v, c) in graph.neighbors(&u) {
            if done[v] {
                continue;
            }
            let nd = d + c;
            let slot = info.get_mut(v).expect("room");
            let better = nd < slot.distance;
            let tie = nd == slot.distance && slot.predecessor.as_ref().is_some_and(|p| u < *p);
            if better || tie {
                slot.distance = nd;
                slot.predecessor = Some(u.clone());
                if better {
                    heap.push(Entry(nd, v.clone()));
                }
            }
        }
    }
    Ok(info)
}

/// Rooms from `source` to `target` along the predecessor chain, both ends included.
pub fn shortest_path(info: &BTreeMap<NodeId, PathInfo>, source: &NodeId, target: &NodeId) -> Option<Vec<NodeId>> {
    if !info.get(target)?.distance.is_finite() {
        return None;
    }
    let mut path = vec![target.clone()];
    let mut cur = target;
    while cur != source {
        cur = info.get(cur)?.predecessor.as_ref()?;
        path.push(cur.clone());
        if path.len() > info.len() {
            return None;
        }
    }
    path.reverse();
    Some(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> NodeId {
        NodeId::new(s)
    }

    fn graph(rooms: &[&str], edges: &[(&str, &str, f64)]) -> RoomGraph {
        let e: Vec<_> = edges.iter().map(|(a, b, c)| (id(a), id(b), *c)).collect();
        RoomGraph::from_edges(rooms.iter().map(|r| id(r)), &e).unwrap()
    }

    #[test]
    fn line_graph() {
        let g = graph(&["A", "B", "C"], &[("A", "B", 1.0), ("B", "C", 2.0)]);
        let d = dijkstra(&g, &id("A")).unwrap();
        assert_eq!(d[&id("C")].distance, 3.0);
        assert_eq!(shortest_path(&d, &id("A"), &id("C")).unwrap(), vec![id("A"), id("B"), id("C")]);
    }

    #[test]
    fn triangle_prefers_two_hops() {
        let g = graph(&["A", "B", "C"], &[("A", "B", 1.0), ("B", "C", 1.0), ("A", "C", 3.0)]);
        let d = dijkstra(&g, &id("A")).unwrap();
        assert_eq!(d[&id("C")].distance, 2.0);
        assert_eq!(d[&id("C")].predecessor, Some(id("B")));
    }

    #[test]
    fn tie_broken_by_smaller_predecessor() {
        let g = graph(
            &["S", "X", "Y", "T"],
            &[("S", "Y", 1.0), ("S", "X", 1.0), ("Y", "T", 1.0), ("X", "T", 1.0)],
        );
        let d = dijkstra(&g, &id("S")).unwrap();
        assert_eq!(d[&id("T")].predecessor, Some(id("X")));
    }

    #[test]
    fn unreachable_is_infinite() {
        let g = graph(&["A", "B", "C"], &[("A", "B", 1.0)]);
        let d = dijkstra(&g, &id("A")).unwrap();
        assert_eq!(d[&id("C")].distance, f64::INFINITY);
        assert!(shortest_path(&d, &id("A"), &id("C")).is_none());
    }

    #[test]
    fn negative_cost_rejected() {
        let e = vec![(id("A"), id("B"), -1.0)];
        assert!(matches!(
            RoomGraph::from_edges([id("A"), id("B")], &e),
            Err(SearchError::NegativeCost { .. })
        ));
    }

    #[test]
    fn zero_cost_cycle_has_no_predecessor_loop() {
        let g = graph(&["a", "b", "c"], &[("a", "b", 0.0), ("b", "c", 0.0), ("a", "c", 0.0)]);
        let d = dijkstra(&g, &id("a")).unwrap();
        for r in ["a", "b", "c"] {
            assert!(shortest_path(&d, &id("a"), &id(r)).is_some());
        }
    }
}
