//! Graph refinement toolkit.
//!
//! The library evaluates neighbor quality with a learned symmetric pair
//! classifier, rewires graphs by dropping low-scoring 1-hop edges and adding
//! high-scoring 2-hop edges, and measures what the rewiring buys downstream:
//! node-classification accuracy under simple graph convolution and top-k
//! recommendation quality under neighbor-sampling policies.
//!
//! Module map:
//! - [`graph`]: CSR graphs, label vectors, positive-ratio statistics.
//! - [`propagate`]: symmetric degree normalization and K-step propagation.
//! - [`edge_model`]: the trainable symmetric edge classifier.
//! - [`refine`]: filter/add rewiring, closed-form expectation models, and
//!   the noisy oracle used by the simulation lab.
//! - [`node_clf`]: SGC-style node classification on precomputed features.
//! - [`reco`]: bipartite interaction graphs, neighbor sampling policies, and
//!   ranking metrics.
//! - [`synth`]: seeded generators for labeled graphs and planted-group
//!   bipartite benchmarks, plus controlled graph degradation.
//! - [`data_io`]: on-disk bundle formats with checksums.

pub mod data_io;
pub mod edge_model;
pub mod graph;
pub mod matrix;
pub mod node_clf;
pub mod numerics;
pub mod propagate;
pub mod reco;
pub mod refine;
pub mod rng;
pub mod synth;
