//! Sparse graphs in canonical CSR form, node labels, and neighbor-quality
//! statistics.
//!
//! A neighbor is *positive* when it shares the node's label and *negative*
//! otherwise; self-loops never count. The per-node positive ratio
//! `r_v = n_v+ / (n_v+ + n_v-)` and its global aggregate are the quantities
//! the rewiring pipeline tries to raise.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    EmptyNodeSet,
    #[error("edge ({u}, {v}) endpoint out of range for {num_nodes} nodes")]
    EndpointOutOfRange { u: usize, v: usize, num_nodes: usize },
    #[error("node {node} out of range for {num_nodes} nodes")]
    NodeOutOfRange { node: usize, num_nodes: usize },
    #[error("label vector covers {got} nodes, graph has {expected}")]
    LabelLengthMismatch { expected: usize, got: usize },
    #[error("label {label} of node {node} exceeds class count {num_classes}")]
    LabelOutOfRange {
        node: usize,
        label: usize,
        num_classes: usize,
    },
    #[error("node {node} has no known label")]
    UnlabeledNode { node: usize },
    #[error("node {node} appears in more than one split")]
    OverlappingSplits { node: usize },
}

/// Disjoint train/validation/test node sets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSplits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl NodeSplits {
    /// Checks that every node is in range and no node sits in two splits.
    pub fn validate(&self, num_nodes: usize) -> Result<(), GraphError> {
        let mut seen = vec![false; num_nodes];
        for &node in self.train.iter().chain(&self.val).chain(&self.test) {
            if node >= num_nodes {
                return Err(GraphError::NodeOutOfRange { node, num_nodes });
            }
            if seen[node] {
                return Err(GraphError::OverlappingSplits { node });
            }
            seen[node] = true;
        }
        Ok(())
    }
}

/// Undirected graph stored as CSR with sorted, duplicate-free rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    symmetric: bool,
    has_self_loops: bool,
}

impl Graph {
    /// Builds a canonical CSR graph from an edge list.
    ///
    /// Duplicate edges collapse to one adjacency entry. With `symmetrize`,
    /// every input edge is mirrored; without it, symmetry of the input is
    /// verified and recorded. With `add_self_loops`, a `(v, v)` entry is
    /// ensured for every node.
    pub fn build(
        edges: &[(usize, usize)],
        num_nodes: usize,
        symmetrize: bool,
        add_self_loops: bool,
    ) -> Result<Graph, GraphError> {
        if num_nodes == 0 {
            return Err(GraphError::EmptyNodeSet);
        }
        for &(u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(GraphError::EndpointOutOfRange { u, v, num_nodes });
            }
        }

        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        for &(u, v) in edges {
            rows[u].push(v);
            if symmetrize && u != v {
                rows[v].push(u);
            }
        }
        if add_self_loops {
            for (v, row) in rows.iter_mut().enumerate() {
                row.push(v);
            }
        }
        let mut row_offsets = Vec::with_capacity(num_nodes + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            col_indices.extend_from_slice(row);
            row_offsets.push(col_indices.len());
        }

        let mut g = Graph {
            num_nodes,
            row_offsets,
            col_indices,
            symmetric: symmetrize,
            has_self_loops: add_self_loops,
        };
        if !symmetrize {
            g.symmetric = g.verify_symmetric();
        }
        if !add_self_loops {
            g.has_self_loops = (0..num_nodes).all(|v| g.has_edge(v, v));
        }
        Ok(g)
    }

    fn verify_symmetric(&self) -> bool {
        self.edges().all(|(u, v)| self.has_edge(v, u))
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of directed adjacency entries (self-loops count once).
    pub fn num_entries(&self) -> usize {
        self.col_indices.len()
    }

    /// True when every stored edge has its mirror entry.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// True when every node carries a self-loop.
    pub fn has_self_loops(&self) -> bool {
        self.has_self_loops
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    /// Sorted neighbor ids of `v`, including a self-loop if present.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[v]..self.row_offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.row_offsets[v + 1] - self.row_offsets[v]
    }

    /// Degree without the self-loop entry.
    pub fn non_self_degree(&self, v: usize) -> usize {
        self.degree(v) - usize::from(self.has_edge(v, v))
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// All directed adjacency entries in row order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes).flat_map(move |u| self.neighbors(u).iter().map(move |&v| (u, v)))
    }

    /// Each undirected non-self edge once, as `(u, v)` with `u < v`.
    pub fn undirected_non_self_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges().filter(|&(u, v)| u < v)
    }

    /// Nodes that carry a self-loop entry.
    pub fn self_loop_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes).filter(|&v| self.has_edge(v, v)).collect()
    }

    /// Nodes exactly two hops from `v`: reachable through a non-self
    /// neighbor, excluding `v` itself and all of its 1-hop neighbors.
    /// Sorted ascending.
    pub fn two_hop_candidates(&self, v: usize) -> Result<Vec<usize>, GraphError> {
        if v >= self.num_nodes {
            return Err(GraphError::NodeOutOfRange {
                node: v,
                num_nodes: self.num_nodes,
            });
        }
        let mut blocked = vec![false; self.num_nodes];
        blocked[v] = true;
        for &u in self.neighbors(v) {
            blocked[u] = true;
        }
        let mut out = Vec::new();
        for &u in self.neighbors(v) {
            if u == v {
                continue;
            }
            for &w in self.neighbors(u) {
                if !blocked[w] && w != u {
                    blocked[w] = true;
                    out.push(w);
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }
}

/// Node class assignments with a visibility mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelVector {
    labels: Vec<usize>,
    num_classes: usize,
    known_mask: Vec<bool>,
}

impl LabelVector {
    /// `known_mask == None` marks every label as known.
    pub fn new(
        labels: Vec<usize>,
        num_classes: usize,
        known_mask: Option<Vec<bool>>,
    ) -> Result<LabelVector, GraphError> {
        let known_mask = known_mask.unwrap_or_else(|| vec![true; labels.len()]);
        if known_mask.len() != labels.len() {
            return Err(GraphError::LabelLengthMismatch {
                expected: labels.len(),
                got: known_mask.len(),
            });
        }
        for (node, (&label, &known)) in labels.iter().zip(known_mask.iter()).enumerate() {
            if known && label >= num_classes {
                return Err(GraphError::LabelOutOfRange {
                    node,
                    label,
                    num_classes,
                });
            }
        }
        Ok(LabelVector {
            labels,
            num_classes,
            known_mask,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn is_known(&self, v: usize) -> bool {
        self.known_mask[v]
    }

    /// Label of `v` when known.
    pub fn label_of(&self, v: usize) -> Option<usize> {
        self.known_mask[v].then(|| self.labels[v])
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn known_mask(&self) -> &[bool] {
        &self.known_mask
    }

    /// Same labels with visibility narrowed to `nodes`.
    pub fn restricted_to(&self, nodes: &[usize]) -> Result<LabelVector, GraphError> {
        let mut mask = vec![false; self.labels.len()];
        for &v in nodes {
            if v >= self.labels.len() {
                return Err(GraphError::NodeOutOfRange {
                    node: v,
                    num_nodes: self.labels.len(),
                });
            }
            mask[v] = true;
        }
        LabelVector::new(self.labels.clone(), self.num_classes, Some(mask))
    }
}

/// Positive/negative neighbor counts per node and in aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub per_node_positive: Vec<usize>,
    pub per_node_negative: Vec<usize>,
    /// `r_v` per node; nodes without countable neighbors report 1.0
    /// (nothing to filter).
    pub per_node_ratio: Vec<f64>,
    pub global_positive: usize,
    pub global_negative: usize,
    /// Sum of positive counts over the sum of all counts.
    pub global_ratio: f64,
}

/// Positive fraction with the empty-neighborhood convention pinned to 1.0.
pub fn ratio_from_counts(positive: usize, negative: usize) -> f64 {
    if positive + negative == 0 {
        1.0
    } else {
        positive as f64 / (positive + negative) as f64
    }
}

/// Counts positive and negative non-self neighbors for every node.
///
/// Every edge endpoint must carry a known label. For a symmetric graph each
/// undirected edge contributes to both endpoint counts, so the global sums
/// are twice the undirected edge tallies.
pub fn ratio_stats(g: &Graph, y: &LabelVector) -> Result<RatioStats, GraphError> {
    if y.len() != g.num_nodes() {
        return Err(GraphError::LabelLengthMismatch {
            expected: g.num_nodes(),
            got: y.len(),
        });
    }
    let n = g.num_nodes();
    let mut pos = vec![0usize; n];
    let mut neg = vec![0usize; n];
    for v in 0..n {
        let yv = match y.label_of(v) {
            Some(l) => l,
            None => {
                if g.non_self_degree(v) == 0 {
                    continue;
                }
                return Err(GraphError::UnlabeledNode { node: v });
            }
        };
        for &u in g.neighbors(v) {
            if u == v {
                continue;
            }
            let yu = y.label_of(u).ok_or(GraphError::UnlabeledNode { node: u })?;
            if yu == yv {
                pos[v] += 1;
            } else {
                neg[v] += 1;
            }
        }
    }
    let global_positive: usize = pos.iter().sum();
    let global_negative: usize = neg.iter().sum();
    let per_node_ratio = pos
        .iter()
        .zip(neg.iter())
        .map(|(&p, &q)| ratio_from_counts(p, q))
        .collect();
    Ok(RatioStats {
        per_node_ratio,
        per_node_positive: pos,
        per_node_negative: neg,
        global_positive,
        global_negative,
        global_ratio: ratio_from_counts(global_positive, global_negative),
    })
}
