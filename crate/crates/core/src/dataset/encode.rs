use std::collections::{BTreeSet, HashMap};

use ndarray::Array2;

use crate::error::{DatasetError, GraphError};
use crate::graph::{Layer, NodeId, SceneGraph};

/// Per-node class counts for the building and room nodes of one graph.
///
/// Row 0 is the building, followed by rooms in id order. `edges` lists the
/// undirected links of the masked graph (building–room containment plus any
/// room/building traversal edges) as row-index pairs `(i, j)` with `i < j`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub row_ids: Vec<NodeId>,
    pub values: Array2<f64>,
    pub edges: Vec<(usize, usize)>,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn row_index(&self, id: &NodeId) -> Option<usize> {
        self.row_ids.iter().position(|r| r == id)
    }

    pub fn row(&self, id: &NodeId) -> Option<ndarray::ArrayView1<'_, f64>> {
        self.row_index(id).map(|i| self.values.row(i))
    }

    /// Same masked nodes in the same order, with the same links.
    pub fn same_layout(&self, other: &FeatureMatrix) -> bool {
        self.row_ids == other.row_ids
            && self.edges == other.edges
            && self.values.dim() == other.values.dim()
    }
}

/// Encodes object counts (blind nodes excluded) as building/room features.
pub fn encode(graph: &SceneGraph) -> Result<FeatureMatrix, DatasetError> {
    let report = graph.validate();
    if !report.is_empty() {
        return Err(GraphError::Invalid(report).into());
    }
    Ok(encode_unchecked(graph)?)
}

pub(crate) fn encode_unchecked(graph: &SceneGraph) -> Result<FeatureMatrix, GraphError> {
    let row_ids = graph.masked_ids();
    let n = graph.catalog().len();
    let index: HashMap<&NodeId, usize> = row_ids.iter().enumerate().map(|(i, id)| (id, i)).collect();
    let mut values = Array2::zeros((row_ids.len(), n));
    for (r, id) in row_ids.iter().enumerate() {
        let h = graph.node_histogram(id, false)?;
        for (c, &count) in h.counts().iter().enumerate() {
            values[[r, c]] = count as f64;
        }
    }
    let mut edges = BTreeSet::new();
    for e in graph.edges() {
        let (Some(&a), Some(&b)) = (index.get(&e.from), index.get(&e.to)) else {
            continue;
        };
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    debug_assert!(row_ids
        .iter()
        .all(|id| graph.node(id).is_some_and(|n| n.layer != Layer::Object)));
    Ok(FeatureMatrix {
        row_ids,
        values,
        edges: edges.into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::catalog::ClassCatalog;
    use crate::dataset::degrade;

    fn catalog() -> Arc<ClassCatalog> {
        Arc::new(ClassCatalog::new(["chair", "table", "sink"]).unwrap())
    }

    #[test]
    fn building_row_is_room_sum() {
        let g = SceneGraph::builder(catalog())
            .building("b")
            .room("b", "r1")
            .room("b", "r2")
            .object("r1", "o1", "chair")
            .object("r1", "o2", "chair")
            .object("r2", "o3", "chair")
            .object("r2", "o4", "sink")
            .build()
            .unwrap();
        let f = encode(&g).unwrap();
        assert_eq!(f.values.dim(), (3, 3));
        // by hand: r1 = (2,0,0), r2 = (1,0,1), building = (3,0,1)
        assert_eq!(f.values.row(0).to_vec(), vec![3.0, 0.0, 1.0]);
        assert_eq!(f.values.row(1).to_vec(), vec![2.0, 0.0, 0.0]);
        assert_eq!(f.values.row(2).to_vec(), vec![1.0, 0.0, 1.0]);
        assert_eq!(f.edges, vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn empty_rooms_zero_matrix() {
        let g = SceneGraph::builder(catalog())
            .building("b")
            .room("b", "r1")
            .room("b", "r2")
            .room("b", "r3")
            .traversal("r1", "r3", 4.0)
            .build()
            .unwrap();
        let f = encode(&g).unwrap();
        assert_eq!(f.values, Array2::<f64>::zeros((4, 3)));
        assert_eq!(f.edges, vec![(0, 1), (0, 2), (0, 3), (1, 3)]);
    }

    #[test]
    fn blind_nodes_excluded() {
        let g = SceneGraph::builder(catalog())
            .building("b")
            .room("b", "r1")
            .blind("r1", "x", "chair")
            .build()
            .unwrap();
        assert_eq!(encode(&g).unwrap().values.sum(), 0.0);
    }

    #[test]
    fn partial_never_exceeds_ground_truth() {
        let mut b = SceneGraph::builder(catalog()).building("b");
        for r in 0..3 {
            let room = format!("r{r}");
            b = b.room("b", room.as_str());
            for o in 0..(r + 3) {
                b = b.object(room.as_str(), format!("{room}/o{o}").as_str(), ["chair", "table", "sink"][(o + r) % 3]);
            }
        }
        let g = b.build().unwrap();
        let full = encode(&g).unwrap();
        for seed in 0..20 {
            let p = encode(&degrade(&g, seed, 0.5).unwrap()).unwrap();
            assert!(p.same_layout(&full));
            assert!(p.values.iter().zip(full.values.iter()).all(|(a, b)| a <= b));
        }
    }
}
