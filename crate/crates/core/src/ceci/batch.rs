use std::ops::Range;

use ndarray::{concatenate, Array2, ArrayView2, Axis};

use crate::dataset::FeatureMatrix;
use crate::error::ModelError;

/// Symmetric normalized adjacency D̃^{-1/2}(A+I)D̃^{-1/2} in CSR form.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency {
    size: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl NormalizedAdjacency {
    /// Builds Â for `size` nodes from undirected `edges`; duplicates and
    /// self-pairs are ignored, self-loops are always added.
    pub fn from_edges(size: usize, edges: &[(usize, usize)]) -> Self {
        Self::block_diagonal(&[(size, edges)])
    }

    /// Block-diagonal Â over several graphs; block `g` occupies the next `sizes[g]` rows.
    pub fn block_diagonal(blocks: &[(usize, &[(usize, usize)])]) -> Self {
        let total: usize = blocks.iter().map(|(s, _)| s).sum();
        let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); total];
        let mut offset = 0;
        for (size, edges) in blocks {
            for i in 0..*size {
                neighbors[offset + i].push(offset + i);
            }
            for &(a, b) in edges.iter() {
                if a != b && a < *size && b < *size {
                    neighbors[offset + a].push(offset + b);
                    neighbors[offset + b].push(offset + a);
                }
            }
            offset += size;
        }
        for row in &mut neighbors {
            row.sort_unstable();
            row.dedup();
        }
        let inv_sqrt_deg: Vec<f64> = neighbors.iter().map(|r| 1.0 / (r.len() as f64).sqrt()).collect();
        let mut indptr = Vec::with_capacity(total + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for (i, row) in neighbors.iter().enumerate() {
            for &j in row {
                indices.push(j);
                values.push(inv_sqrt_deg[i] * inv_sqrt_deg[j]);
            }
            indptr.push(indices.len());
        }
        Self {
            size: total,
            indptr,
            indices,
            values,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = self.indptr[i]..self.indptr[i + 1];
        self.indices[row.clone()]
            .iter()
            .position(|&c| c == j)
            .map_or(0.0, |k| self.values[row.start + k])
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.size, self.size));
        for i in 0..self.size {
            for k in self.indptr[i]..self.indptr[i + 1] {
                out[[i, self.indices[k]]] = self.values[k];
            }
        }
        out
    }

    /// Â · `h`, summing neighbors in ascending column order.
    pub fn matmul(&self, h: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(h.nrows(), self.size, "adjacency/feature row mismatch");
        let mut out = Array2::zeros((self.size, h.ncols()));
        for i in 0..self.size {
            let mut row = out.row_mut(i);
            for k in self.indptr[i]..self.indptr[i + 1] {
                row.scaled_add(self.values[k], &h.row(self.indices[k]));
            }
        }
        out
    }
}

/// Several graphs stacked for one forward pass.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    pub adjacency: NormalizedAdjacency,
    /// Q × n partial-graph histograms.
    pub features: Array2<f64>,
    /// Q × n ground-truth histograms; absent for inference batches.
    pub targets: Option<Array2<f64>>,
    pub ranges: Vec<Range<usize>>,
}

impl GraphBatch {
    pub fn rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn classes(&self) -> usize {
        self.features.ncols()
    }
}

fn stack(mats: &[ArrayView2<'_, f64>]) -> Array2<f64> {
    concatenate(Axis(0), mats).expect("column counts checked")
}

/// Batches `(partial, ground truth)` feature pairs into a block-diagonal batch.
pub fn build_batch(pairs: &[(&FeatureMatrix, &FeatureMatrix)]) -> Result<GraphBatch, ModelError> {
    let Some((first, _)) = pairs.first() else {
        return Err(ModelError::Shape("empty batch".into()));
    };
    let n = first.cols();
    for (k, (x, y)) in pairs.iter().enumerate() {
        if !x.same_layout(y) {
            return Err(ModelError::Shape(format!(
                "pair {k}: partial {:?} and ground truth {:?} differ in masked nodes or links",
                x.values.dim(),
                y.values.dim()
            )));
        }
        if x.cols() != n {
            return Err(ModelError::Shape(format!("pair {k}: {} classes, expected {n}", x.cols())));
        }
    }
    let mut batch = build_inference_batch(&pairs.iter().map(|(x, _)| *x).collect::<Vec<_>>())?;
    let ys: Vec<_> = pairs.iter().map(|(_, y)| y.values.view()).collect();
    batch.targets = Some(stack(&ys));
    Ok(batch)
}

/// Batch without targets, for prediction.
pub fn build_inference_batch(graphs: &[&FeatureMatrix]) -> Result<GraphBatch, ModelError> {
    let Some(first) = graphs.first() else {
        return Err(ModelError::Shape("empty batch".into()));
    };
    let n = first.cols();
    if let Some(bad) = graphs.iter().find(|g| g.cols() != n) {
        return Err(ModelError::Shape(format!("{} classes, expected {n}", bad.cols())));
    }
    let mut ranges = Vec::with_capacity(graphs.len());
    let mut start = 0;
    for g in graphs {
        ranges.push(start..start + g.rows());
        start += g.rows();
    }
    let blocks: Vec<(usize, &[(usize, usize)])> = graphs.iter().map(|g| (g.rows(), g.edges.as_slice())).collect();
    let xs: Vec<_> = graphs.iter().map(|g| g.values.view()).collect();
    Ok(GraphBatch {
        adjacency: NormalizedAdjacency::block_diagonal(&blocks),
        features: stack(&xs),
        targets: None,
        ranges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeId;

    fn fm(rows: usize, edges: Vec<(usize, usize)>) -> FeatureMatrix {
        FeatureMatrix {
            row_ids: (0..rows).map(|i| NodeId::new(format!("n{i}"))).collect(),
            values: Array2::from_elem((rows, 2), 1.0),
            edges,
        }
    }

    #[test]
    fn star_normalization() {
        // building 0 linked to rooms 1, 2: degrees with self-loop 3, 2, 2
        let a = NormalizedAdjacency::from_edges(3, &[(0, 1), (0, 2)]);
        assert!((a.get(0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((a.get(1, 1) - 0.5).abs() < 1e-15);
        assert!((a.get(0, 1) - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert_eq!(a.get(1, 2), 0.0);
    }

    #[test]
    fn block_diagonal_has_no_cross_terms() {
        let g1 = fm(3, vec![(0, 1), (0, 2)]);
        let g2 = fm(4, vec![(0, 1), (0, 2), (0, 3), (1, 2)]);
        let b = build_batch(&[(&g1, &g1), (&g2, &g2)]).unwrap();
        let d = b.adjacency.to_dense();
        assert_eq!(d.dim(), (7, 7));
        for i in 0..3 {
            for j in 3..7 {
                assert_eq!(d[[i, j]], 0.0);
                assert_eq!(d[[j, i]], 0.0);
            }
        }
        assert_eq!(b.ranges, vec![0..3, 3..7]);
        assert_eq!(b.targets.as_ref().unwrap().dim(), (7, 2));
    }

    #[test]
    fn containment_only_room_still_linked() {
        let a = NormalizedAdjacency::from_edges(3, &[(0, 1), (0, 2), (1, 2)]).to_dense();
        let b = NormalizedAdjacency::from_edges(3, &[(0, 1), (0, 2)]).to_dense();
        // room 2 without traversal: self-loop + building link
        assert!(b.row(2).iter().filter(|v| **v > 0.0).count() == 2);
        assert!(a.row(2).iter().filter(|v| **v > 0.0).count() == 3);
    }

    #[test]
    fn mismatched_pair_rejected() {
        let a = fm(3, vec![(0, 1), (0, 2)]);
        let b = fm(2, vec![(0, 1)]);
        assert!(matches!(build_batch(&[(&a, &b)]), Err(ModelError::Shape(_))));
    }

    #[test]
    fn sparse_matmul_matches_dense() {
        let a = NormalizedAdjacency::from_edges(4, &[(0, 1), (0, 2), (0, 3), (2, 3)]);
        let h = Array2::from_shape_fn((4, 3), |(i, j)| (i * 3 + j) as f64 - 4.0);
        let sparse = a.matmul(h.view());
        let dense = a.to_dense().dot(&h);
        for (x, y) in sparse.iter().zip(dense.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
