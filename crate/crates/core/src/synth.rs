//! Synthetic datasets with controllable neighbor quality.
//!
//! The labeled-graph generator draws class-conditional Gaussian features
//! and wires each node to same-class partners with a configurable
//! probability, so the realized positive ratio concentrates on the target.
//! A degrading rewiring lowers that ratio by pairing nodes with new
//! different-label neighbors, and a grouped bipartite generator produces
//! user-item data where group structure predicts held-out interactions.

use crate::graph::{Graph, GraphError, LabelVector, NodeSplits};
use crate::matrix::{FeatureMatrix, MatrixError};
use crate::reco::{BipartiteGraph, RecoError};
use crate::rng;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("generation infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Reco(#[from] RecoError),
}

/// Controls for the labeled-graph generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthGraphConfig {
    pub num_nodes: usize,
    pub num_classes: usize,
    /// Poisson mean of per-node partner draws. Every drawn edge also adds
    /// one to its partner's degree, so final mean degree is about twice
    /// this.
    pub mean_degree: f64,
    /// Probability that a drawn partner shares the node's class.
    pub target_ratio: f64,
    pub feature_dim: usize,
    /// Distance between class feature means.
    pub class_separation: f64,
    pub seed: u64,
}

impl Default for SynthGraphConfig {
    fn default() -> Self {
        SynthGraphConfig {
            num_nodes: 1000,
            num_classes: 4,
            mean_degree: 5.0,
            target_ratio: 0.7,
            feature_dim: 16,
            class_separation: 1.0,
            seed: 0,
        }
    }
}

/// Graph, features, fully known labels, and a 60/20/20 node split.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: LabelVector,
    pub splits: NodeSplits,
}

/// Draws a labeled graph whose positive ratio concentrates on
/// `target_ratio`. Deterministic per seed.
pub fn generate_labeled_graph(cfg: &SynthGraphConfig) -> Result<LabeledDataset, SynthError> {
    if cfg.num_nodes < 2 {
        return Err(SynthError::InvalidConfig("need at least two nodes".into()));
    }
    if cfg.num_classes == 0 {
        return Err(SynthError::InvalidConfig("need at least one class".into()));
    }
    if cfg.num_classes < 2 && cfg.target_ratio < 1.0 {
        return Err(SynthError::InvalidConfig(
            "different-label partners require at least two classes".into(),
        ));
    }
    if cfg.feature_dim < cfg.num_classes {
        return Err(SynthError::InvalidConfig(format!(
            "feature_dim {} must be at least num_classes {}",
            cfg.feature_dim, cfg.num_classes
        )));
    }
    if !(0.0..=1.0).contains(&cfg.target_ratio) {
        return Err(SynthError::InvalidConfig(format!(
            "target_ratio {} outside [0, 1]",
            cfg.target_ratio
        )));
    }
    if cfg.mean_degree < 0.0 || !cfg.mean_degree.is_finite() {
        return Err(SynthError::InvalidConfig(format!(
            "mean_degree {} must be finite and non-negative",
            cfg.mean_degree
        )));
    }
    if cfg.class_separation < 0.0 {
        return Err(SynthError::InvalidConfig("class_separation must be non-negative".into()));
    }

    let mut r = rng::substream(cfg.seed, &[0x7379_6e67]);
    let labels: Vec<usize> = (0..cfg.num_nodes).map(|_| r.gen_range(0..cfg.num_classes)).collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); cfg.num_classes];
    for (v, &c) in labels.iter().enumerate() {
        members[c].push(v);
    }

    let mut edges = Vec::new();
    if cfg.mean_degree > 0.0 {
        let poisson = Poisson::new(cfg.mean_degree)
            .map_err(|e| SynthError::InvalidConfig(format!("mean_degree: {e}")))?;
        for v in 0..cfg.num_nodes {
            let stubs = poisson.sample(&mut r) as usize;
            for _ in 0..stubs {
                let want_positive = r.gen::<f64>() < cfg.target_ratio;
                let partner = if want_positive {
                    let pool = &members[labels[v]];
                    if pool.len() < 2 {
                        continue;
                    }
                    // Rejection keeps the draw uniform over the pool minus v.
                    let mut picked = None;
                    for _ in 0..100 {
                        let w = pool[r.gen_range(0..pool.len())];
                        if w != v {
                            picked = Some(w);
                            break;
                        }
                    }
                    match picked {
                        Some(w) => w,
                        None => continue,
                    }
                } else {
                    let mut picked = None;
                    for _ in 0..100 {
                        let w = r.gen_range(0..cfg.num_nodes);
                        if labels[w] != labels[v] {
                            picked = Some(w);
                            break;
                        }
                    }
                    match picked {
                        Some(w) => w,
                        None => continue,
                    }
                };
                edges.push((v, partner));
            }
        }
    }
    let graph = Graph::build(&edges, cfg.num_nodes, true, false)?;

    let spread = cfg.class_separation / 2.0f64.sqrt();
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut features = FeatureMatrix::zeros(cfg.num_nodes, cfg.feature_dim);
    for v in 0..cfg.num_nodes {
        let row = features.row_mut(v);
        for (c, val) in row.iter_mut().enumerate() {
            *val = noise.sample(&mut r) + if c == labels[v] { spread } else { 0.0 };
        }
    }

    let mut order: Vec<usize> = (0..cfg.num_nodes).collect();
    order.shuffle(&mut r);
    let train_end = (cfg.num_nodes * 6) / 10;
    let val_end = (cfg.num_nodes * 8) / 10;
    let mut splits = NodeSplits {
        train: order[..train_end].to_vec(),
        val: order[train_end..val_end].to_vec(),
        test: order[val_end..].to_vec(),
    };
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();

    let labels = LabelVector::new(labels, cfg.num_classes, None)?;
    Ok(LabeledDataset {
        graph,
        features,
        labels,
        splits,
    })
}

/// Controls for the ratio-degrading rewiring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegradeConfig {
    /// New different-label neighbors every node must gain.
    pub per_node: usize,
    pub seed: u64,
}

/// Adds exactly `per_node` new different-label neighbors to every node by
/// pairing open attachment slots. Existing edges are preserved. Fails when
/// no such pairing exists (odd total slots, single class) or none is found
/// within the retry budget.
pub fn degrade_graph(g: &Graph, y: &LabelVector, cfg: &DegradeConfig) -> Result<Graph, SynthError> {
    if y.len() != g.num_nodes() {
        return Err(SynthError::Graph(GraphError::LabelLengthMismatch {
            expected: g.num_nodes(),
            got: y.len(),
        }));
    }
    for v in 0..g.num_nodes() {
        if !y.is_known(v) {
            return Err(SynthError::Graph(GraphError::UnlabeledNode { node: v }));
        }
    }
    if cfg.per_node == 0 {
        return Ok(g.clone());
    }
    let n = g.num_nodes();
    if (n * cfg.per_node) % 2 != 0 {
        return Err(SynthError::Infeasible(format!(
            "{n} nodes x {} slots is odd, edges consume two slots",
            cfg.per_node
        )));
    }
    let num_classes = y.num_classes();
    let mut class_nodes: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for v in 0..n {
        class_nodes[y.label_of(v).expect("checked above")].push(v);
    }
    if class_nodes.iter().filter(|c| !c.is_empty()).count() < 2 {
        return Err(SynthError::Infeasible(
            "different-label edges require at least two classes".into(),
        ));
    }
    // Each new edge takes one slot inside a class and one outside, so no
    // class may hold more than half of all slots.
    let max_class = class_nodes.iter().map(|c| c.len()).max().unwrap_or(0);
    if 2 * max_class > n {
        return Err(SynthError::Infeasible(format!(
            "largest class holds {max_class} of {n} nodes, its slots cannot all pair outside"
        )));
    }

    let base_edges: Vec<(usize, usize)> = g
        .undirected_non_self_edges()
        .chain(g.self_loop_nodes().into_iter().map(|v| (v, v)))
        .collect();
    let total_new = n * cfg.per_node / 2;
    for restart in 0..20u64 {
        let mut r = rng::substream(cfg.seed, &[0x6465_6772, restart]);
        let mut quota = vec![cfg.per_node; n];
        let mut open: Vec<Vec<usize>> = class_nodes.clone();
        let mut slots: Vec<usize> = open.iter().map(|c| c.len() * cfg.per_node).collect();
        let mut added: HashSet<(usize, usize)> = HashSet::new();
        let mut new_edges = Vec::with_capacity(total_new);
        let budget = 100 * total_new.max(1);
        let mut attempts = 0usize;

        // Uniform stub draw inside one class, weighted by remaining quota.
        let draw = |open: &[Vec<usize>], quota: &[usize], class: usize, pick: usize| -> usize {
            let mut rest = pick;
            for &v in &open[class] {
                if rest < quota[v] {
                    return v;
                }
                rest -= quota[v];
            }
            unreachable!("pick bounded by the class slot count")
        };

        while new_edges.len() < total_new && attempts < budget {
            attempts += 1;
            // Drain the slot-heaviest class first; this keeps the end state
            // pairable instead of stranding one class with itself.
            let heavy = (0..num_classes).max_by_key(|&c| slots[c]).expect("classes exist");
            let other_total: usize = slots
                .iter()
                .enumerate()
                .filter(|&(c, _)| c != heavy)
                .map(|(_, &s)| s)
                .sum();
            if slots[heavy] == 0 || other_total == 0 {
                break;
            }
            let u = draw(&open, &quota, heavy, r.gen_range(0..slots[heavy]));
            let mut pick = r.gen_range(0..other_total);
            let mut partner_class = usize::MAX;
            for c in 0..num_classes {
                if c == heavy {
                    continue;
                }
                if pick < slots[c] {
                    partner_class = c;
                    break;
                }
                pick -= slots[c];
            }
            let w = draw(&open, &quota, partner_class, pick);
            let key = (u.min(w), u.max(w));
            if g.has_edge(key.0, key.1) || added.contains(&key) {
                continue;
            }
            added.insert(key);
            new_edges.push(key);
            for (node, class) in [(u, heavy), (w, partner_class)] {
                quota[node] -= 1;
                slots[class] -= 1;
                if quota[node] == 0 {
                    open[class].retain(|&v| v != node);
                }
            }
        }
        if new_edges.len() == total_new {
            let mut all = base_edges.clone();
            all.extend(new_edges);
            return Ok(Graph::build(&all, n, true, g.has_self_loops())?);
        }
    }
    Err(SynthError::Infeasible(format!(
        "no pairing with {} fresh different-label neighbors per node found",
        cfg.per_node
    )))
}

/// Controls for the grouped bipartite generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthBipartiteConfig {
    pub num_users: usize,
    pub num_items: usize,
    /// Users and items belong to `id % num_groups`.
    pub num_groups: usize,
    /// Interaction probability for cross-group pairs; in-group pairs
    /// interact with probability 0.5. At 0.5 the group structure vanishes.
    pub noise: f64,
    /// Stddev of the Gaussian perturbation on the one-hot group
    /// embeddings. Larger values leave more for neighbor averaging to
    /// recover.
    pub embedding_noise: f64,
    pub seed: u64,
}

impl Default for SynthBipartiteConfig {
    fn default() -> Self {
        SynthBipartiteConfig {
            num_users: 100,
            num_items: 200,
            num_groups: 4,
            noise: 0.1,
            embedding_noise: 0.1,
            seed: 0,
        }
    }
}

const IN_GROUP_RATE: f64 = 0.5;

/// Training interactions, held-out pairs, and noisy group embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteDataset {
    pub train: BipartiteGraph,
    pub test: Vec<(usize, usize)>,
    /// One row per user then per item, width `num_groups`.
    pub embeddings: FeatureMatrix,
    pub num_groups: usize,
}

/// Draws grouped user-item interactions, splits them 80/20 per user, and
/// attaches group-revealing embeddings. In-group interactions carry higher
/// weights on average than cross-group ones, with overlapping ranges.
pub fn generate_bipartite(cfg: &SynthBipartiteConfig) -> Result<BipartiteDataset, SynthError> {
    if cfg.num_users == 0 || cfg.num_items == 0 {
        return Err(SynthError::InvalidConfig("need users and items".into()));
    }
    if cfg.num_groups == 0 || cfg.num_groups > cfg.num_users || cfg.num_groups > cfg.num_items {
        return Err(SynthError::InvalidConfig(format!(
            "num_groups {} must be in [1, min(users, items)]",
            cfg.num_groups
        )));
    }
    if !(0.0..=1.0).contains(&cfg.noise) {
        return Err(SynthError::InvalidConfig(format!("noise {} outside [0, 1]", cfg.noise)));
    }
    if !cfg.embedding_noise.is_finite() || cfg.embedding_noise < 0.0 {
        return Err(SynthError::InvalidConfig(format!(
            "embedding_noise {} must be a finite non-negative value",
            cfg.embedding_noise
        )));
    }

    let mut r = rng::substream(cfg.seed, &[0x6269_7061]);
    let in_group = |u: usize, i: usize| u % cfg.num_groups == i % cfg.num_groups;
    let draw_weight = |r: &mut rand_chacha::ChaCha8Rng, in_grp: bool| -> f64 {
        if in_grp {
            r.gen_range(1.0..3.0)
        } else {
            r.gen_range(0.9..2.9)
        }
    };

    // Per-user interaction rows; resample empty rows a bounded number of
    // times so every user can be split.
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(cfg.num_users);
    for u in 0..cfg.num_users {
        let mut row = Vec::new();
        let mut tries = 0;
        loop {
            row.clear();
            for i in 0..cfg.num_items {
                let p = if in_group(u, i) { IN_GROUP_RATE } else { cfg.noise };
                if r.gen::<f64>() < p {
                    let w = draw_weight(&mut r, in_group(u, i));
                    row.push((i, w));
                }
            }
            tries += 1;
            if !row.is_empty() || tries >= 100 {
                break;
            }
        }
        if row.is_empty() {
            return Err(SynthError::Infeasible(format!(
                "user {u} drew no interactions in 100 attempts"
            )));
        }
        rows.push(row);
    }

    // 80/20 split per user with at least one training interaction.
    let mut train_rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(cfg.num_users);
    let mut test = Vec::new();
    for row in rows.iter_mut() {
        row.shuffle(&mut r);
        let n = row.len();
        let train_count = ((n as f64) * 0.8).round().max(1.0) as usize;
        let train_count = train_count.min(n);
        train_rows.push(row[..train_count].to_vec());
        test.extend(
            row[train_count..]
                .iter()
                .map(|&(i, _)| (train_rows.len() - 1, i)),
        );
    }

    // Every item needs a training interaction so its embedding can
    // aggregate; patch gaps through the lowest-id same-group user.
    let mut item_has_train = vec![false; cfg.num_items];
    for (_, row) in train_rows.iter().enumerate() {
        for &(i, _) in row {
            item_has_train[i] = true;
        }
    }
    for i in 0..cfg.num_items {
        if item_has_train[i] {
            continue;
        }
        let u = i % cfg.num_groups;
        if let Some(pos) = test.iter().position(|&(tu, ti)| tu == u && ti == i) {
            // Move the held-out pair into training rather than duplicating.
            test.swap_remove(pos);
            let w = draw_weight(&mut r, true);
            train_rows[u].push((i, w));
        } else {
            let w = draw_weight(&mut r, in_group(u, i));
            train_rows[u].push((i, w));
        }
        item_has_train[i] = true;
    }

    let mut interactions = Vec::new();
    for (u, row) in train_rows.iter().enumerate() {
        for &(i, w) in row {
            interactions.push((u, i, w));
        }
    }
    let train = BipartiteGraph::build(&interactions, cfg.num_users, cfg.num_items)?;
    test.sort_unstable();

    let noise_dist = Normal::new(0.0, cfg.embedding_noise).expect("validated stddev");
    let mut embeddings = FeatureMatrix::zeros(cfg.num_users + cfg.num_items, cfg.num_groups);
    for node in 0..cfg.num_users + cfg.num_items {
        let group = if node < cfg.num_users {
            node % cfg.num_groups
        } else {
            (node - cfg.num_users) % cfg.num_groups
        };
        let row = embeddings.row_mut(node);
        for (c, val) in row.iter_mut().enumerate() {
            *val = noise_dist.sample(&mut r) + if c == group { 1.0 } else { 0.0 };
        }
    }

    Ok(BipartiteDataset {
        train,
        test,
        embeddings,
        num_groups: cfg.num_groups,
    })
}
