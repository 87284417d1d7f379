//! Degree-normalized adjacency and K-step feature propagation.
//!
//! The operator is `D^{-1/2} (A + I) D^{-1/2}` where degrees include the
//! inserted self-loops, and the K-step transform is its K-fold application
//! to a dense feature matrix. Per-row accumulation always walks columns in
//! ascending order, so repeated runs are bit-identical.

use crate::graph::Graph;
use crate::matrix::FeatureMatrix;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PropagateError {
    #[error("feature matrix has {got} rows, graph has {expected} nodes")]
    FeatureRows { expected: usize, got: usize },
}

/// Sparse symmetric operator with entries `1 / sqrt(d_u d_v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Entry for `(u, v)`, 0.0 when the edge is absent.
    pub fn entry(&self, u: usize, v: usize) -> f64 {
        let lo = self.row_offsets[u];
        let hi = self.row_offsets[u + 1];
        match self.col_indices[lo..hi].binary_search(&v) {
            Ok(i) => self.values[lo + i],
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, u: usize) -> (&[usize], &[f64]) {
        let lo = self.row_offsets[u];
        let hi = self.row_offsets[u + 1];
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    /// One propagation step; output row `u` accumulates neighbor rows in
    /// ascending column order.
    fn apply(&self, x: &FeatureMatrix) -> FeatureMatrix {
        let cols = x.cols();
        let mut out = FeatureMatrix::zeros(self.num_nodes, cols);
        for u in 0..self.num_nodes {
            let (nbrs, vals) = self.row(u);
            let dst = out.row_mut(u);
            for (&v, &w) in nbrs.iter().zip(vals.iter()) {
                let src = x.row(v);
                for (d, &s) in dst.iter_mut().zip(src.iter()) {
                    *d += w * s;
                }
            }
        }
        out
    }
}

/// Builds the normalized operator, inserting self-loops when absent.
///
/// Every entry lies in `(0, 1]` and the matrix is symmetric. Isolated nodes
/// end up with a single diagonal entry of 1.
pub fn normalize_adjacency(g: &Graph) -> NormalizedAdjacency {
    let with_loops: Graph;
    let base = if g.has_self_loops() {
        g
    } else {
        let edges: Vec<_> = g.edges().collect();
        with_loops = Graph::build(&edges, g.num_nodes(), false, true)
            .expect("re-building an existing graph cannot fail");
        &with_loops
    };
    let n = base.num_nodes();
    let mut values = Vec::with_capacity(base.num_entries());
    for u in 0..n {
        let du = base.degree(u);
        for &v in base.neighbors(u) {
            // Exact integer product under one sqrt keeps the entry within
            // one rounding of the analytic value.
            values.push(1.0 / ((du * base.degree(v)) as f64).sqrt());
        }
    }
    NormalizedAdjacency {
        num_nodes: n,
        row_offsets: base.row_offsets().to_vec(),
        col_indices: base.col_indices().to_vec(),
        values,
    }
}

/// K-fold application of the operator; `k = 0` returns the input unchanged.
pub fn propagate_k(
    adj: &NormalizedAdjacency,
    x: &FeatureMatrix,
    k: usize,
) -> Result<FeatureMatrix, PropagateError> {
    if x.rows() != adj.num_nodes() {
        return Err(PropagateError::FeatureRows {
            expected: adj.num_nodes(),
            got: x.rows(),
        });
    }
    let mut h = x.clone();
    for _ in 0..k {
        h = adj.apply(&h);
    }
    Ok(h)
}

/// Two-step propagation of raw features: the training-free embedding used
/// by the edge classifier.
pub fn parameter_free_embedding(g: &Graph, x: &FeatureMatrix) -> Result<FeatureMatrix, PropagateError> {
    propagate_k(&normalize_adjacency(g), x, 2)
}
