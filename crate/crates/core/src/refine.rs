//! Graph rewiring driven by a pair scorer, plus the closed-form expectation
//! models and the noisy oracle used to study rewiring without training.
//!
//! Filtering drops every non-self edge whose score is at or below the
//! threshold. Adding connects nodes to 2-hop candidates whose score clears
//! the threshold, in descending score order, while both endpoints stay under
//! the degree cap. Both steps preserve self-loops and symmetry.

use crate::graph::{Graph, GraphError, LabelVector};
use crate::matrix::FeatureMatrix;
use crate::rng::unit_hash;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RefineError {
    #[error("refinement requires a symmetric graph")]
    NotSymmetric,
    #[error("embedding matrix has {got} rows, graph has {expected} nodes")]
    EmbeddingRows { expected: usize, got: usize },
    #[error("scorer returned a non-finite value for pair ({u}, {v})")]
    NonFiniteScore { u: usize, v: usize },
    #[error("scorer failure: {0}")]
    Scorer(String),
    #[error("filter expectation degenerate: all neighbors removed")]
    DegenerateFilter,
    #[error("expectation undefined for an empty neighborhood")]
    EmptyNeighborhood,
    #[error("invalid mixture model: {0}")]
    InvalidMixture(String),
    #[error("ratio {0} outside [0, 1]")]
    InvalidRatio(f64),
    #[error("probability {name} = {value} outside [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("count {name} = {value} is negative")]
    NegativeCount { name: &'static str, value: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Symmetric pair scorer: implementations must return the same value for
/// `(u, v)` and `(v, u)`.
pub trait PairScorer {
    fn score(&self, u: usize, v: usize, embeddings: &FeatureMatrix) -> Result<f64, RefineError>;
}

/// Order in which surviving candidates are inserted by the add step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CandidateOrder {
    /// Highest score first; ties broken by ascending endpoint ids.
    #[default]
    DescendingScore,
}

/// Rewiring switches and budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub do_filter: bool,
    pub do_add: bool,
    /// Non-self degree cap enforced by the add step.
    pub n_max: usize,
    /// Scores at or below this are dropped by the filter; only scores
    /// strictly above it qualify for adding.
    pub threshold: f64,
    pub candidate_order: CandidateOrder,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            do_filter: true,
            do_add: true,
            n_max: 6,
            threshold: 0.5,
            candidate_order: CandidateOrder::DescendingScore,
        }
    }
}

fn check_inputs(g: &Graph, embeddings: &FeatureMatrix) -> Result<(), RefineError> {
    if !g.is_symmetric() {
        return Err(RefineError::NotSymmetric);
    }
    if embeddings.rows() != g.num_nodes() {
        return Err(RefineError::EmbeddingRows {
            expected: g.num_nodes(),
            got: embeddings.rows(),
        });
    }
    Ok(())
}

fn checked_score(
    scorer: &dyn PairScorer,
    u: usize,
    v: usize,
    embeddings: &FeatureMatrix,
) -> Result<f64, RefineError> {
    let s = scorer.score(u, v, embeddings)?;
    if !s.is_finite() {
        return Err(RefineError::NonFiniteScore { u, v });
    }
    Ok(s)
}

/// Removes every non-self edge whose score is at or below the threshold.
///
/// Each undirected edge is scored exactly once and removed in both
/// directions. Self-loops survive untouched, so nodes that lose all
/// neighbors stay usable for propagation.
pub fn filter_graph(
    g: &Graph,
    scorer: &dyn PairScorer,
    embeddings: &FeatureMatrix,
    cfg: &RefineConfig,
) -> Result<Graph, RefineError> {
    check_inputs(g, embeddings)?;
    let mut kept: Vec<(usize, usize)> = Vec::new();
    for (u, v) in g.undirected_non_self_edges() {
        if checked_score(scorer, u, v, embeddings)? > cfg.threshold {
            kept.push((u, v));
        }
    }
    kept.extend(g.self_loop_nodes().into_iter().map(|v| (v, v)));
    Ok(Graph::build(&kept, g.num_nodes(), true, false)?)
}

/// Connects under-capacity nodes to their best-scoring 2-hop candidates.
///
/// Candidate pairs are ranked globally by descending score (ties by
/// ascending endpoint ids) and inserted while both endpoints remain below
/// `n_max` non-self neighbors, so no node ever exceeds
/// `max(existing degree, n_max)`.
pub fn add_neighbors(
    g: &Graph,
    scorer: &dyn PairScorer,
    embeddings: &FeatureMatrix,
    cfg: &RefineConfig,
) -> Result<Graph, RefineError> {
    check_inputs(g, embeddings)?;
    let n = g.num_nodes();
    let mut degree: Vec<usize> = (0..n).map(|v| g.non_self_degree(v)).collect();

    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for v in 0..n {
        if degree[v] >= cfg.n_max {
            continue;
        }
        for w in g.two_hop_candidates(v)? {
            // Each unordered pair is scored once, from its lower endpoint.
            if w <= v || degree[w] >= cfg.n_max {
                continue;
            }
            let s = checked_score(scorer, v, w, embeddings)?;
            if s > cfg.threshold {
                candidates.push((s, v, w));
            }
        }
    }
    let CandidateOrder::DescendingScore = cfg.candidate_order;
    candidates.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.cmp(&b.1))
            .then_with(|| a.2.cmp(&b.2))
    });

    let mut edges: Vec<(usize, usize)> = g.edges().collect();
    for (_, v, w) in candidates {
        if degree[v] < cfg.n_max && degree[w] < cfg.n_max {
            edges.push((v, w));
            degree[v] += 1;
            degree[w] += 1;
        }
    }
    Ok(Graph::build(&edges, n, true, false)?)
}

/// Filter then add, as enabled by the config; the add step works with
/// post-filter degrees.
pub fn enhance(
    g: &Graph,
    scorer: &dyn PairScorer,
    embeddings: &FeatureMatrix,
    cfg: &RefineConfig,
) -> Result<Graph, RefineError> {
    check_inputs(g, embeddings)?;
    let mut out = g.clone();
    if cfg.do_filter {
        out = filter_graph(&out, scorer, embeddings, cfg)?;
    }
    if cfg.do_add {
        out = add_neighbors(&out, scorer, embeddings, cfg)?;
    }
    Ok(out)
}

/// Two-component Gaussian view of neighbor feature quality: positive
/// neighbors carry mean `mu_plus`, negative ones `mu_minus`, both with the
/// same spread, separated by the decision point `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub mu_plus: f64,
    pub mu_minus: f64,
    pub sigma: f64,
    pub tau: f64,
}

impl MixtureModel {
    pub fn new(mu_plus: f64, mu_minus: f64, sigma: f64, tau: f64) -> Result<Self, RefineError> {
        if !(mu_minus < tau && tau < mu_plus) {
            return Err(RefineError::InvalidMixture(format!(
                "need mu_minus < tau < mu_plus, got {mu_minus}, {tau}, {mu_plus}"
            )));
        }
        if !(sigma > 0.0) {
            return Err(RefineError::InvalidMixture(format!("sigma {sigma} must be positive")));
        }
        Ok(MixtureModel {
            mu_plus,
            mu_minus,
            sigma,
            tau,
        })
    }

    /// Decision point at the midpoint of the two means.
    pub fn midpoint(mu_plus: f64, mu_minus: f64, sigma: f64) -> Result<Self, RefineError> {
        MixtureModel::new(mu_plus, mu_minus, sigma, 0.5 * (mu_plus + mu_minus))
    }
}

fn check_probability(name: &'static str, value: f64) -> Result<(), RefineError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(RefineError::InvalidProbability { name, value });
    }
    Ok(())
}

fn check_count(name: &'static str, value: f64) -> Result<(), RefineError> {
    if !(value >= 0.0) {
        return Err(RefineError::NegativeCount { name, value });
    }
    Ok(())
}

/// Mean neighborhood feature value when a fraction `r` of neighbors is
/// positive: `r mu_plus + (1 - r) mu_minus`.
pub fn expected_origin(r: f64, m: &MixtureModel) -> Result<f64, RefineError> {
    if !(0.0..=1.0).contains(&r) {
        return Err(RefineError::InvalidRatio(r));
    }
    Ok(r * m.mu_plus + (1.0 - r) * m.mu_minus)
}

/// Mean surviving-neighbor feature value after filtering, where positives
/// survive with rate `p` and negatives with rate `q`.
///
/// Degenerate when `p n_pos + q n_neg = 0`: every neighbor is removed.
pub fn expected_filter(
    n_pos: f64,
    n_neg: f64,
    p: f64,
    q: f64,
    m: &MixtureModel,
) -> Result<f64, RefineError> {
    check_count("n_pos", n_pos)?;
    check_count("n_neg", n_neg)?;
    check_probability("p", p)?;
    check_probability("q", q)?;
    let denom = p * n_pos + q * n_neg;
    if denom == 0.0 {
        return Err(RefineError::DegenerateFilter);
    }
    Ok((p * n_pos * m.mu_plus + q * n_neg * m.mu_minus) / denom)
}

/// Mean neighborhood feature value after adding `n_add` predicted-positive
/// neighbors of which a fraction `p_pre` is truly positive.
pub fn expected_adder(
    n_pos: f64,
    n_neg: f64,
    n_add: f64,
    p_pre: f64,
    m: &MixtureModel,
) -> Result<f64, RefineError> {
    check_count("n_pos", n_pos)?;
    check_count("n_neg", n_neg)?;
    check_count("n_add", n_add)?;
    check_probability("p_pre", p_pre)?;
    let total = n_pos + n_neg + n_add;
    if total == 0.0 {
        return Err(RefineError::EmptyNeighborhood);
    }
    let pos_mass = n_pos + p_pre * n_add;
    let neg_mass = n_neg + (1.0 - p_pre) * n_add;
    Ok((pos_mass * m.mu_plus + neg_mass * m.mu_minus) / total)
}

/// Label-aware stochastic scorer: same-label pairs score 1.0 with
/// probability `p_true`, different-label pairs with probability `q_true`,
/// and 0.0 otherwise.
///
/// The coin for a pair is a hash of `(seed, min, max)`, so the outcome is a
/// fixed property of the unordered pair: repeated queries agree and no call
/// order can change a result.
#[derive(Debug, Clone)]
pub struct NoisyOracle {
    labels: Vec<usize>,
    p_true: f64,
    q_true: f64,
    seed: u64,
}

impl NoisyOracle {
    pub fn p_true(&self) -> f64 {
        self.p_true
    }

    pub fn q_true(&self) -> f64 {
        self.q_true
    }
}

/// Builds a [`NoisyOracle`]; every label must be known.
pub fn make_noisy_oracle(
    y: &LabelVector,
    p_true: f64,
    q_true: f64,
    seed: u64,
) -> Result<NoisyOracle, RefineError> {
    check_probability("p_true", p_true)?;
    check_probability("q_true", q_true)?;
    let mut labels = Vec::with_capacity(y.len());
    for v in 0..y.len() {
        labels.push(
            y.label_of(v)
                .ok_or(RefineError::Graph(GraphError::UnlabeledNode { node: v }))?,
        );
    }
    Ok(NoisyOracle {
        labels,
        p_true,
        q_true,
        seed,
    })
}

impl PairScorer for NoisyOracle {
    fn score(&self, u: usize, v: usize, _embeddings: &FeatureMatrix) -> Result<f64, RefineError> {
        let (lo, hi) = (u.min(v) as u64, u.max(v) as u64);
        let rate = if self.labels[u] == self.labels[v] {
            self.p_true
        } else {
            self.q_true
        };
        Ok(if unit_hash(self.seed, lo, hi) < rate {
            1.0
        } else {
            0.0
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct ConstantScorer(f64);

    impl PairScorer for ConstantScorer {
        fn score(&self, _: usize, _: usize, _: &FeatureMatrix) -> Result<f64, RefineError> {
            Ok(self.0)
        }
    }

    fn mixture01() -> MixtureModel {
        MixtureModel::midpoint(1.0, 0.0, 0.5).unwrap()
    }

    fn perfect_oracle(y: &LabelVector) -> NoisyOracle {
        make_noisy_oracle(y, 1.0, 0.0, 0).unwrap()
    }

    fn no_features(n: usize) -> FeatureMatrix {
        FeatureMatrix::zeros(n, 0)
    }

    #[test]
    fn expected_origin_endpoints() {
        let m = mixture01();
        assert_eq!(expected_origin(1.0, &m).unwrap(), 1.0);
        assert_eq!(expected_origin(0.0, &m).unwrap(), 0.0);
        assert!(expected_origin(1.5, &m).is_err());
    }

    #[test]
    fn expected_filter_hand_example() {
        let m = mixture01();
        let v = expected_filter(3.0, 1.0, 0.9, 0.3, &m).unwrap();
        assert!((v - 0.9).abs() < 1e-15);
    }

    #[test]
    fn expected_filter_degenerate_when_everything_dies() {
        let m = mixture01();
        assert_eq!(
            expected_filter(3.0, 1.0, 0.0, 0.0, &m),
            Err(RefineError::DegenerateFilter)
        );
    }

    #[test]
    fn expected_adder_hand_example() {
        let m = mixture01();
        let v = expected_adder(1.0, 1.0, 2.0, 1.0, &m).unwrap();
        assert!((v - 0.75).abs() < 1e-15);
    }

    #[test]
    fn expected_adder_requires_nonempty_neighborhood() {
        let m = mixture01();
        assert_eq!(
            expected_adder(0.0, 0.0, 0.0, 0.5, &m),
            Err(RefineError::EmptyNeighborhood)
        );
    }

    #[test]
    fn mixture_model_validates_ordering() {
        assert!(MixtureModel::new(1.0, 0.0, 0.5, 0.5).is_ok());
        assert!(MixtureModel::new(0.0, 1.0, 0.5, 0.5).is_err());
        assert!(MixtureModel::new(1.0, 0.0, 0.0, 0.5).is_err());
        assert!(MixtureModel::new(1.0, 0.0, 0.5, 2.0).is_err());
    }

    #[test]
    fn filter_removes_different_label_edges_under_perfect_oracle() {
        let g = Graph::build(&[(0, 1), (1, 2)], 3, true, false).unwrap();
        let y = LabelVector::new(vec![0, 0, 1], 2, None).unwrap();
        let oracle = perfect_oracle(&y);
        let f = filter_graph(&g, &oracle, &no_features(3), &RefineConfig::default()).unwrap();
        assert!(f.has_edge(0, 1) && f.has_edge(1, 0));
        assert!(!f.has_edge(1, 2) && !f.has_edge(2, 1));
    }

    #[test]
    fn filter_keeps_graph_unchanged_under_all_ones_scorer() {
        let g = Graph::build(&[(0, 1), (1, 2), (0, 3)], 4, true, true).unwrap();
        let f = filter_graph(&g, &ConstantScorer(1.0), &no_features(4), &RefineConfig::default())
            .unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn filter_preserves_self_loops_when_all_edges_die() {
        let g = Graph::build(&[(0, 1)], 2, true, true).unwrap();
        let f = filter_graph(&g, &ConstantScorer(0.0), &no_features(2), &RefineConfig::default())
            .unwrap();
        assert!(f.has_edge(0, 0) && f.has_edge(1, 1));
        assert!(!f.has_edge(0, 1));
        assert_eq!(f.non_self_degree(0), 0);
    }

    #[test]
    fn filter_drops_scores_equal_to_threshold() {
        let g = Graph::build(&[(0, 1)], 2, true, false).unwrap();
        let cfg = RefineConfig::default();
        let f = filter_graph(&g, &ConstantScorer(0.5), &no_features(2), &cfg).unwrap();
        assert!(!f.has_edge(0, 1));
    }

    #[test]
    fn filter_rejects_asymmetric_graphs() {
        let g = Graph::build(&[(0, 1)], 2, false, false).unwrap();
        assert_eq!(
            filter_graph(&g, &ConstantScorer(1.0), &no_features(2), &RefineConfig::default()),
            Err(RefineError::NotSymmetric)
        );
    }

    #[test]
    fn filter_rejects_embedding_row_mismatch() {
        let g = Graph::build(&[(0, 1)], 2, true, false).unwrap();
        assert_eq!(
            filter_graph(&g, &ConstantScorer(1.0), &no_features(5), &RefineConfig::default()),
            Err(RefineError::EmbeddingRows {
                expected: 2,
                got: 5
            })
        );
    }

    #[test]
    fn add_connects_same_label_two_hop_pair_on_path() {
        let g = Graph::build(&[(0, 1), (1, 2)], 3, true, false).unwrap();
        let y = LabelVector::new(vec![0, 1, 0], 2, None).unwrap();
        let oracle = perfect_oracle(&y);
        let cfg = RefineConfig {
            n_max: 2,
            ..RefineConfig::default()
        };
        let a = add_neighbors(&g, &oracle, &no_features(3), &cfg).unwrap();
        assert!(a.has_edge(0, 2) && a.has_edge(2, 0));
        assert!(a.has_edge(0, 1) && a.has_edge(1, 2));
    }

    #[test]
    fn add_connects_only_same_label_leaves_of_star() {
        // Star center 4 with leaves 0..3; leaves 0,1 share a label, 2,3
        // share another, the center holds a third.
        let g = Graph::build(&[(4, 0), (4, 1), (4, 2), (4, 3)], 5, true, false).unwrap();
        let y = LabelVector::new(vec![0, 0, 1, 1, 2], 3, None).unwrap();
        let oracle = perfect_oracle(&y);
        let cfg = RefineConfig {
            n_max: 6,
            ..RefineConfig::default()
        };
        let a = add_neighbors(&g, &oracle, &no_features(5), &cfg).unwrap();
        assert!(a.has_edge(0, 1));
        assert!(a.has_edge(2, 3));
        for &(u, v) in &[(0, 2), (0, 3), (1, 2), (1, 3)] {
            assert!(!a.has_edge(u, v), "unexpected edge ({u}, {v})");
        }
    }

    #[test]
    fn add_respects_degree_cap_on_both_endpoints() {
        // Node 0 is connected to hub 1; hub neighbors 2..5 all share node
        // 0's label, but node 0 may only grow to 3 neighbors.
        let g = Graph::build(&[(0, 1), (1, 2), (1, 3), (1, 4), (1, 5)], 6, true, false).unwrap();
        let y = LabelVector::new(vec![0, 1, 0, 0, 0, 0], 2, None).unwrap();
        let oracle = perfect_oracle(&y);
        let cfg = RefineConfig {
            n_max: 3,
            ..RefineConfig::default()
        };
        let a = add_neighbors(&g, &oracle, &no_features(6), &cfg).unwrap();
        assert_eq!(a.non_self_degree(0), 3);
        // Ties on equal scores resolve toward ascending ids.
        assert!(a.has_edge(0, 2) && a.has_edge(0, 3));
        assert!(!a.has_edge(0, 4) && !a.has_edge(0, 5));
        for v in 0..6 {
            assert!(a.non_self_degree(v) <= g.non_self_degree(v).max(cfg.n_max));
        }
    }

    #[test]
    fn add_skips_nodes_already_at_capacity() {
        let g = Graph::build(&[(0, 1), (1, 2)], 3, true, false).unwrap();
        let y = LabelVector::new(vec![0, 1, 0], 2, None).unwrap();
        let oracle = perfect_oracle(&y);
        let cfg = RefineConfig {
            n_max: 1,
            ..RefineConfig::default()
        };
        let a = add_neighbors(&g, &oracle, &no_features(3), &cfg).unwrap();
        assert_eq!(a, g);
    }

    #[test]
    fn enhance_filters_then_adds() {
        // 0-1 same label, 1-2 cross label, 2-3 same label; path graph.
        // Filtering drops 1-2; adding reconnects 0-2? No: after the filter,
        // 2-hop sets shrink, so only pairs still two hops apart are
        // candidates.
        let g = Graph::build(&[(0, 1), (1, 2), (1, 3)], 4, true, false).unwrap();
        let y = LabelVector::new(vec![0, 0, 1, 0], 2, None).unwrap();
        let oracle = perfect_oracle(&y);
        let cfg = RefineConfig {
            n_max: 3,
            ..RefineConfig::default()
        };
        let e = enhance(&g, &oracle, &no_features(4), &cfg).unwrap();
        assert!(!e.has_edge(1, 2));
        assert!(e.has_edge(0, 3), "same-label 2-hop pair should connect");
        let stats_y = crate::graph::ratio_stats(&e, &y).unwrap();
        assert_eq!(stats_y.global_negative, 0);
    }

    #[test]
    fn enhance_with_both_steps_disabled_is_identity() {
        let g = Graph::build(&[(0, 1), (1, 2)], 3, true, false).unwrap();
        let cfg = RefineConfig {
            do_filter: false,
            do_add: false,
            ..RefineConfig::default()
        };
        let e = enhance(&g, &ConstantScorer(0.0), &no_features(3), &cfg).unwrap();
        assert_eq!(e, g);
    }

    #[test]
    fn oracle_is_deterministic_per_pair_and_symmetric() {
        let y = LabelVector::new(vec![0; 50], 1, None).unwrap();
        let oracle = make_noisy_oracle(&y, 0.7, 0.2, 42).unwrap();
        let x = no_features(50);
        for u in 0..50 {
            for v in (u + 1)..50 {
                let a = oracle.score(u, v, &x).unwrap();
                assert_eq!(a, oracle.score(v, u, &x).unwrap());
                assert_eq!(a, oracle.score(u, v, &x).unwrap());
                assert!(a == 0.0 || a == 1.0);
            }
        }
    }

    #[test]
    fn oracle_rates_concentrate_on_p_and_q() {
        let n = 200usize;
        let labels: Vec<usize> = (0..n).map(|v| v % 2).collect();
        let y = LabelVector::new(labels.clone(), 2, None).unwrap();
        let oracle = make_noisy_oracle(&y, 0.8, 0.3, 7).unwrap();
        let x = no_features(n);
        let (mut same_hits, mut same_total) = (0usize, 0usize);
        let (mut diff_hits, mut diff_total) = (0usize, 0usize);
        for u in 0..n {
            for v in (u + 1)..n {
                let s = oracle.score(u, v, &x).unwrap();
                if labels[u] == labels[v] {
                    same_total += 1;
                    same_hits += (s == 1.0) as usize;
                } else {
                    diff_total += 1;
                    diff_hits += (s == 1.0) as usize;
                }
            }
        }
        let p_hat = same_hits as f64 / same_total as f64;
        let q_hat = diff_hits as f64 / diff_total as f64;
        let se_p = (0.8 * 0.2 / same_total as f64).sqrt();
        let se_q = (0.3 * 0.7 / diff_total as f64).sqrt();
        assert!((p_hat - 0.8).abs() <= 3.0 * se_p, "p_hat {p_hat}");
        assert!((q_hat - 0.3).abs() <= 3.0 * se_q, "q_hat {q_hat}");
    }

    #[test]
    fn perfect_oracle_scores_match_labels_exactly() {
        let y = LabelVector::new(vec![0, 0, 1], 2, None).unwrap();
        let oracle = perfect_oracle(&y);
        let x = no_features(3);
        assert_eq!(oracle.score(0, 1, &x).unwrap(), 1.0);
        assert_eq!(oracle.score(0, 2, &x).unwrap(), 0.0);
    }

    #[test]
    fn oracle_requires_fully_known_labels() {
        let y = LabelVector::new(vec![0, 0], 1, Some(vec![true, false])).unwrap();
        assert!(make_noisy_oracle(&y, 0.5, 0.5, 0).is_err());
    }
}
