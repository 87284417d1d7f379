//! Neighbor-refined top-k recommendation over user-item interactions.
//!
//! Users occupy global embedding rows `[0, N)` and items `[N, N + M)`. A
//! compatibility score built from log-sigmoid terms ranks each node's
//! interaction partners; the selected partners are averaged into the node's
//! embedding before dot-product ranking. Precision, recall, and NDCG at k
//! measure the effect against held-out interactions.

use crate::matrix::{dot, FeatureMatrix};
use crate::numerics::{log_one_minus_sigmoid, log_sigmoid};
use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RecoError {
    #[error("bipartite graph needs at least one user and one item")]
    EmptyGraph,
    #[error("user {user} out of range for {num_users} users")]
    UserOutOfRange { user: usize, num_users: usize },
    #[error("item {item} out of range for {num_items} items")]
    ItemOutOfRange { item: usize, num_items: usize },
    #[error("interaction ({user}, {item}) has non-positive or non-finite weight {weight}")]
    BadWeight { user: usize, item: usize, weight: f64 },
    #[error("embedding rows {got} != users + items = {expected}")]
    RowMismatch { expected: usize, got: usize },
    #[error("alpha {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("test interaction ({user}, {item}) also appears in training data")]
    TestTrainOverlap { user: usize, item: usize },
    #[error("no user has held-out interactions to evaluate")]
    NoEvaluableUsers,
}

/// Weighted user-item interactions stored as two aligned CSR halves.
/// Duplicate pairs sum their weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    num_users: usize,
    num_items: usize,
    user_offsets: Vec<usize>,
    user_items: Vec<usize>,
    user_weights: Vec<f64>,
    item_offsets: Vec<usize>,
    item_users: Vec<usize>,
    item_weights: Vec<f64>,
}

impl BipartiteGraph {
    pub fn build(
        interactions: &[(usize, usize, f64)],
        num_users: usize,
        num_items: usize,
    ) -> Result<Self, RecoError> {
        if num_users == 0 || num_items == 0 {
            return Err(RecoError::EmptyGraph);
        }
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(user, item, weight) in interactions {
            if user >= num_users {
                return Err(RecoError::UserOutOfRange { user, num_users });
            }
            if item >= num_items {
                return Err(RecoError::ItemOutOfRange { item, num_items });
            }
            if !weight.is_finite() || weight <= 0.0 {
                return Err(RecoError::BadWeight { user, item, weight });
            }
            *merged.entry((user, item)).or_insert(0.0) += weight;
        }
        let mut user_offsets = vec![0usize; num_users + 1];
        let mut item_offsets = vec![0usize; num_items + 1];
        for (&(u, i), _) in &merged {
            user_offsets[u + 1] += 1;
            item_offsets[i + 1] += 1;
        }
        for v in 1..=num_users {
            user_offsets[v] += user_offsets[v - 1];
        }
        for v in 1..=num_items {
            item_offsets[v] += item_offsets[v - 1];
        }
        let nnz = merged.len();
        let mut user_items = vec![0usize; nnz];
        let mut user_weights = vec![0.0; nnz];
        let mut item_users = vec![0usize; nnz];
        let mut item_weights = vec![0.0; nnz];
        let mut ucur = user_offsets.clone();
        // BTreeMap iterates in (user, item) order, so user rows fill sorted.
        for (&(u, i), &w) in &merged {
            user_items[ucur[u]] = i;
            user_weights[ucur[u]] = w;
            ucur[u] += 1;
        }
        let mut icur = item_offsets.clone();
        // Second pass in the same order keeps item rows sorted by user id.
        for (&(u, i), &w) in &merged {
            item_users[icur[i]] = u;
            item_weights[icur[i]] = w;
            icur[i] += 1;
        }
        Ok(BipartiteGraph {
            num_users,
            num_items,
            user_offsets,
            user_items,
            user_weights,
            item_offsets,
            item_users,
            item_weights,
        })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    /// Count of distinct interacting pairs.
    pub fn num_interactions(&self) -> usize {
        self.user_items.len()
    }

    /// Total rows in the joint embedding space.
    pub fn num_nodes(&self) -> usize {
        self.num_users + self.num_items
    }

    /// Global embedding row of an item.
    pub fn item_global(&self, item: usize) -> usize {
        self.num_users + item
    }

    /// Items of a user with weights, sorted by item id.
    pub fn user_items(&self, user: usize) -> (&[usize], &[f64]) {
        let lo = self.user_offsets[user];
        let hi = self.user_offsets[user + 1];
        (&self.user_items[lo..hi], &self.user_weights[lo..hi])
    }

    /// Users of an item with weights, sorted by user id.
    pub fn item_users(&self, item: usize) -> (&[usize], &[f64]) {
        let lo = self.item_offsets[item];
        let hi = self.item_offsets[item + 1];
        (&self.item_users[lo..hi], &self.item_weights[lo..hi])
    }

    pub fn has_interaction(&self, user: usize, item: usize) -> bool {
        self.user_items(user).0.binary_search(&item).is_ok()
    }

    /// Interaction partners of a global node as global ids with weights,
    /// ascending by id.
    pub fn global_neighbors(&self, node: usize) -> Vec<(usize, f64)> {
        if node < self.num_users {
            let (items, weights) = self.user_items(node);
            items
                .iter()
                .zip(weights)
                .map(|(&i, &w)| (self.num_users + i, w))
                .collect()
        } else {
            let (users, weights) = self.item_users(node - self.num_users);
            users.iter().zip(weights).map(|(&u, &w)| (u, w)).collect()
        }
    }
}

/// Mean over all user and item embedding rows.
pub fn mean_embedding(x: &FeatureMatrix) -> Vec<f64> {
    let mut mean = vec![0.0; x.cols()];
    for v in 0..x.rows() {
        for (m, &val) in mean.iter_mut().zip(x.row(v)) {
            *m += val;
        }
    }
    let inv = 1.0 / x.rows() as f64;
    for m in mean.iter_mut() {
        *m *= inv;
    }
    mean
}

/// Pairwise compatibility: affinity of the two rows minus a popularity
/// correction toward the mean row,
/// `log_sigmoid(x_a . x_b) + log_one_minus_sigmoid(x_a . mean)`.
pub fn compatibility(x: &FeatureMatrix, a: usize, b: usize, mean: &[f64]) -> f64 {
    log_sigmoid(dot(x.row(a), x.row(b))) + log_one_minus_sigmoid(dot(x.row(a), mean))
}

/// How a node picks which interaction partners to average in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecoPolicy {
    /// Rank partners by visit counts of short random walks.
    RandomWalk,
    /// Rank partners by interaction weight.
    Intuitive,
    /// Rank partners by compatibility score.
    Negcn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateConfig {
    pub policy: RecoPolicy,
    /// Partners kept per node; fewer are kept when the node has fewer.
    pub k_neighbors: usize,
    /// Weight of the node's own embedding in the blend.
    pub alpha: f64,
    /// Random-walk policy only: walks launched per node.
    pub walks: usize,
    /// Random-walk policy only: steps per walk.
    pub walk_length: usize,
    pub seed: u64,
}

impl Default for AggregateConfig {
    fn default() -> Self {
        AggregateConfig {
            policy: RecoPolicy::Negcn,
            k_neighbors: 10,
            alpha: 0.5,
            walks: 100,
            walk_length: 3,
            seed: 0,
        }
    }
}

fn walk_counts(g: &BipartiteGraph, origin: usize, cfg: &AggregateConfig) -> Vec<(usize, usize)> {
    let neighbors = g.global_neighbors(origin);
    let neighbor_ids: Vec<usize> = neighbors.iter().map(|&(id, _)| id).collect();
    let mut counts = vec![0usize; neighbor_ids.len()];
    let mut r = rng::substream(cfg.seed, &[0x7761_6c6b, origin as u64]);
    for _ in 0..cfg.walks {
        let mut current = origin;
        for _ in 0..cfg.walk_length {
            let step = g.global_neighbors(current);
            if step.is_empty() {
                break;
            }
            current = step[r.gen_range(0..step.len())].0;
            if let Ok(pos) = neighbor_ids.binary_search(&current) {
                counts[pos] += 1;
            }
        }
    }
    neighbor_ids.into_iter().zip(counts).collect()
}

/// Global ids of the partners the node aggregates, at most
/// `cfg.k_neighbors`, ranked by the policy with ties broken toward lower
/// ids.
pub fn select_neighbors(
    g: &BipartiteGraph,
    x: &FeatureMatrix,
    mean: &[f64],
    node: usize,
    cfg: &AggregateConfig,
) -> Vec<usize> {
    let neighbors = g.global_neighbors(node);
    if neighbors.len() <= cfg.k_neighbors {
        return neighbors.into_iter().map(|(id, _)| id).collect();
    }
    let mut ranked: Vec<(f64, usize)> = match cfg.policy {
        RecoPolicy::Intuitive => neighbors.into_iter().map(|(id, w)| (w, id)).collect(),
        RecoPolicy::Negcn => neighbors
            .into_iter()
            .map(|(id, _)| (compatibility(x, node, id, mean), id))
            .collect(),
        RecoPolicy::RandomWalk => walk_counts(g, node, cfg)
            .into_iter()
            .map(|(id, c)| (c as f64, id))
            .collect(),
    };
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    ranked.truncate(cfg.k_neighbors);
    ranked.into_iter().map(|(_, id)| id).collect()
}

/// Blends every row with the mean of its selected partners:
/// `z = alpha * x + (1 - alpha) * mean(selected)`. Nodes without partners
/// keep their original row.
pub fn aggregate_embeddings(
    g: &BipartiteGraph,
    x: &FeatureMatrix,
    cfg: &AggregateConfig,
) -> Result<FeatureMatrix, RecoError> {
    if x.rows() != g.num_nodes() {
        return Err(RecoError::RowMismatch {
            expected: g.num_nodes(),
            got: x.rows(),
        });
    }
    if !(0.0..=1.0).contains(&cfg.alpha) {
        return Err(RecoError::InvalidAlpha(cfg.alpha));
    }
    if cfg.k_neighbors == 0 {
        return Err(RecoError::InvalidK);
    }
    let mean = mean_embedding(x);
    let mut z = x.clone();
    for node in 0..g.num_nodes() {
        let selected = select_neighbors(g, x, &mean, node, cfg);
        if selected.is_empty() {
            continue;
        }
        let inv = 1.0 / selected.len() as f64;
        let row = z.row_mut(node);
        for c in 0..row.len() {
            let mut acc = 0.0;
            for &nbr in &selected {
                acc += x.get(nbr, c);
            }
            row[c] = cfg.alpha * x.get(node, c) + (1.0 - cfg.alpha) * acc * inv;
        }
    }
    Ok(z)
}

/// Ranking score of an item for a user under aggregated embeddings.
pub fn score_item(z: &FeatureMatrix, num_users: usize, user: usize, item: usize) -> f64 {
    dot(z.row(user), z.row(num_users + item))
}

/// Top-k retrieval quality averaged over users with held-out interactions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoReport {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub ndcg: f64,
    pub users_evaluated: usize,
}

/// Ranks every non-training item per user by `(score desc, item id asc)`
/// and scores the top k against the held-out pairs. Users without held-out
/// items are skipped; a held-out pair that also occurs in training is an
/// error.
pub fn rank_and_evaluate(
    train: &BipartiteGraph,
    test: &[(usize, usize)],
    z: &FeatureMatrix,
    k: usize,
) -> Result<RecoReport, RecoError> {
    if k == 0 {
        return Err(RecoError::InvalidK);
    }
    if z.rows() != train.num_nodes() {
        return Err(RecoError::RowMismatch {
            expected: train.num_nodes(),
            got: z.rows(),
        });
    }
    let mut per_user: Vec<Vec<usize>> = vec![Vec::new(); train.num_users()];
    for &(user, item) in test {
        if user >= train.num_users() {
            return Err(RecoError::UserOutOfRange {
                user,
                num_users: train.num_users(),
            });
        }
        if item >= train.num_items() {
            return Err(RecoError::ItemOutOfRange {
                item,
                num_items: train.num_items(),
            });
        }
        if train.has_interaction(user, item) {
            return Err(RecoError::TestTrainOverlap { user, item });
        }
        per_user[user].push(item);
    }
    let mut sum_precision = 0.0;
    let mut sum_recall = 0.0;
    let mut sum_ndcg = 0.0;
    let mut users_evaluated = 0usize;
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(train.num_items());
    for user in 0..train.num_users() {
        let mut held_out = std::mem::take(&mut per_user[user]);
        if held_out.is_empty() {
            continue;
        }
        held_out.sort_unstable();
        held_out.dedup();
        let train_items = train.user_items(user).0;
        scored.clear();
        for item in 0..train.num_items() {
            if train_items.binary_search(&item).is_ok() {
                continue;
            }
            scored.push((score_item(z, train.num_users(), user, item), item));
        }
        scored.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let top = &scored[..k.min(scored.len())];
        let mut hits = 0usize;
        let mut dcg = 0.0;
        for (pos, &(_, item)) in top.iter().enumerate() {
            if held_out.binary_search(&item).is_ok() {
                hits += 1;
                dcg += 1.0 / ((pos + 2) as f64).log2();
            }
        }
        let ideal: f64 = (0..k.min(held_out.len()))
            .map(|j| 1.0 / ((j + 2) as f64).log2())
            .sum();
        sum_precision += hits as f64 / k as f64;
        sum_recall += hits as f64 / held_out.len() as f64;
        sum_ndcg += if ideal > 0.0 { dcg / ideal } else { 0.0 };
        users_evaluated += 1;
    }
    if users_evaluated == 0 {
        return Err(RecoError::NoEvaluableUsers);
    }
    let denom = users_evaluated as f64;
    Ok(RecoReport {
        k,
        precision: sum_precision / denom,
        recall: sum_recall / denom,
        ndcg: sum_ndcg / denom,
        users_evaluated,
    })
}
