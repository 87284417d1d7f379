//! Trainable symmetric edge classifier.
//!
//! A pair of node embeddings is projected through a shared linear map, then
//! combined into an order-invariant feature vector
//! `concat(|a - b|, a + b, a * b)` and scored by a small ReLU MLP with a
//! sigmoid output. Both the projection and the MLP train jointly by
//! mini-batch gradient descent on binary cross-entropy; positive samples are
//! same-label edges, negatives are different-label pairs balanced 1:1.

use crate::graph::{Graph, GraphError, LabelVector};
use crate::matrix::{FeatureMatrix, MatrixError};
use crate::numerics::{bce_with_logit, sigmoid};
use crate::refine::{PairScorer, RefineError};
use crate::rng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EdgeModelError {
    #[error("no labeled edge samples available")]
    EmptySamples,
    #[error("embedding width {got} does not match classifier input {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("could not balance classes: needed {needed} negatives, found {got}")]
    CannotBalance { needed: usize, got: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// One labeled pair: `y` is true when the endpoints share a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSample {
    pub u: usize,
    pub v: usize,
    pub y: bool,
}

/// Fully connected layer, row-major `in x out` weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: FeatureMatrix,
    pub bias: Vec<f64>,
}

/// Projection plus MLP; hidden layers use ReLU, the final layer emits one
/// logit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeClassifierParams {
    projection: FeatureMatrix,
    layers: Vec<DenseLayer>,
    seed: u64,
}

impl EdgeClassifierParams {
    /// Validates layer chaining: projection `F x d`, first layer input
    /// `3 d`, consecutive widths matching, final output width 1.
    pub fn from_parts(
        projection: FeatureMatrix,
        layers: Vec<DenseLayer>,
        seed: u64,
    ) -> Result<Self, EdgeModelError> {
        if layers.is_empty() {
            return Err(EdgeModelError::InvalidConfig("at least one layer required".into()));
        }
        let mut width = 3 * projection.cols();
        for (i, layer) in layers.iter().enumerate() {
            if layer.weights.rows() != width {
                return Err(EdgeModelError::InvalidConfig(format!(
                    "layer {i} expects input {}, previous width is {width}",
                    layer.weights.rows()
                )));
            }
            if layer.bias.len() != layer.weights.cols() {
                return Err(EdgeModelError::InvalidConfig(format!(
                    "layer {i} bias length {} != output width {}",
                    layer.bias.len(),
                    layer.weights.cols()
                )));
            }
            width = layer.weights.cols();
        }
        if width != 1 {
            return Err(EdgeModelError::InvalidConfig(format!(
                "final layer must emit one logit, emits {width}"
            )));
        }
        Ok(EdgeClassifierParams {
            projection,
            layers,
            seed,
        })
    }

    /// Random initialization with the given embedding width.
    pub fn init(input_dim: usize, proj_dim: usize, hidden: &[usize], seed: u64) -> Result<Self, EdgeModelError> {
        if input_dim == 0 || proj_dim == 0 {
            return Err(EdgeModelError::InvalidConfig(
                "embedding and projection widths must be positive".into(),
            ));
        }
        let mut r = rng::substream(seed, &[0x6564_6765]);
        let projection = xavier(&mut r, input_dim, proj_dim);
        let mut layers = Vec::new();
        let mut width = 3 * proj_dim;
        for &h in hidden {
            if h == 0 {
                return Err(EdgeModelError::InvalidConfig("hidden width must be positive".into()));
            }
            layers.push(DenseLayer {
                weights: xavier(&mut r, width, h),
                bias: vec![0.0; h],
            });
            width = h;
        }
        layers.push(DenseLayer {
            weights: xavier(&mut r, width, 1),
            bias: vec![0.0; 1],
        });
        EdgeClassifierParams::from_parts(projection, layers, seed)
    }

    /// Embedding width the classifier expects.
    pub fn input_dim(&self) -> usize {
        self.projection.rows()
    }

    pub fn proj_dim(&self) -> usize {
        self.projection.cols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn projection(&self) -> &FeatureMatrix {
        &self.projection
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn projection_mut(&mut self) -> &mut FeatureMatrix {
        &mut self.projection
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    fn project(&self, e: &[f64]) -> Vec<f64> {
        let d = self.projection.cols();
        let mut out = vec![0.0; d];
        for (f, &x) in e.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = self.projection.row(f);
            for (o, &w) in out.iter_mut().zip(row.iter()) {
                *o += x * w;
            }
        }
        out
    }
}

fn xavier(r: &mut impl Rng, rows: usize, cols: usize) -> FeatureMatrix {
    let scale = (2.0 / (rows + cols) as f64).sqrt();
    let values = (0..rows * cols)
        .map(|_| {
            // Box-Muller free: uniform scaled init is enough for this depth.
            (r.gen::<f64>() * 2.0 - 1.0) * scale * 3.0f64.sqrt()
        })
        .collect();
    FeatureMatrix::from_values(rows, cols, values).expect("sized allocation")
}

/// Order-invariant pair features after projection:
/// `concat(|a - b|, a + b, a * b)`, width `3 d`.
///
/// Each block is exactly symmetric in IEEE arithmetic, so swapping the
/// endpoints reproduces the identical feature vector bit for bit.
pub fn featurize_pair(
    eu: &[f64],
    ev: &[f64],
    params: &EdgeClassifierParams,
) -> Result<Vec<f64>, EdgeModelError> {
    if eu.len() != params.input_dim() || ev.len() != params.input_dim() {
        return Err(EdgeModelError::WidthMismatch {
            expected: params.input_dim(),
            got: if eu.len() != params.input_dim() {
                eu.len()
            } else {
                ev.len()
            },
        });
    }
    let a = params.project(eu);
    let b = params.project(ev);
    Ok(combine(&a, &b))
}

fn combine(a: &[f64], b: &[f64]) -> Vec<f64> {
    let d = a.len();
    let mut f = Vec::with_capacity(3 * d);
    f.extend(a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()));
    f.extend(a.iter().zip(b.iter()).map(|(x, y)| x + y));
    f.extend(a.iter().zip(b.iter()).map(|(x, y)| x * y));
    f
}

struct Forward {
    // Activations per layer, starting with the combined features.
    activations: Vec<Vec<f64>>,
    // Pre-activation values per layer.
    pre: Vec<Vec<f64>>,
    logit: f64,
}

fn forward(params: &EdgeClassifierParams, features: Vec<f64>) -> Forward {
    let mut activations = vec![features];
    let mut pre = Vec::new();
    let last = params.layers.len() - 1;
    for (i, layer) in params.layers.iter().enumerate() {
        let input = activations.last().expect("non-empty");
        let out_w = layer.weights.cols();
        let mut z = layer.bias.clone();
        for (j, &x) in input.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = layer.weights.row(j);
            for c in 0..out_w {
                z[c] += x * row[c];
            }
        }
        pre.push(z.clone());
        if i == last {
            return Forward {
                logit: z[0],
                activations,
                pre,
            };
        }
        for v in z.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        activations.push(z);
    }
    unreachable!("layers validated non-empty")
}

/// Sigmoid score for the pair; exactly symmetric under endpoint swap.
pub fn predict_edge(
    params: &EdgeClassifierParams,
    eu: &[f64],
    ev: &[f64],
) -> Result<f64, EdgeModelError> {
    let f = featurize_pair(eu, ev, params)?;
    Ok(sigmoid(forward(params, f).logit))
}

/// Gradients with the same shapes as the parameters.
#[derive(Debug, Clone)]
pub struct EdgeGradients {
    pub projection: FeatureMatrix,
    pub layers: Vec<(FeatureMatrix, Vec<f64>)>,
}

impl EdgeGradients {
    fn zeros_like(params: &EdgeClassifierParams) -> Self {
        EdgeGradients {
            projection: FeatureMatrix::zeros(params.projection.rows(), params.projection.cols()),
            layers: params
                .layers
                .iter()
                .map(|l| {
                    (
                        FeatureMatrix::zeros(l.weights.rows(), l.weights.cols()),
                        vec![0.0; l.bias.len()],
                    )
                })
                .collect(),
        }
    }

    fn scale(&mut self, s: f64) {
        for v in self.projection.values_mut() {
            *v *= s;
        }
        for (w, b) in self.layers.iter_mut() {
            for v in w.values_mut() {
                *v *= s;
            }
            for v in b.iter_mut() {
                *v *= s;
            }
        }
    }
}

/// Mean binary cross-entropy of a batch and its gradients with respect to
/// every parameter, including the shared projection.
pub fn batch_loss_and_gradients(
    params: &EdgeClassifierParams,
    samples: &[EdgeSample],
    embeddings: &FeatureMatrix,
) -> Result<(f64, EdgeGradients), EdgeModelError> {
    if samples.is_empty() {
        return Err(EdgeModelError::EmptySamples);
    }
    if embeddings.cols() != params.input_dim() {
        return Err(EdgeModelError::WidthMismatch {
            expected: params.input_dim(),
            got: embeddings.cols(),
        });
    }
    let d = params.proj_dim();
    let mut grads = EdgeGradients::zeros_like(params);
    let mut total_loss = 0.0;
    for s in samples {
        let eu = embeddings.row(s.u);
        let ev = embeddings.row(s.v);
        let a = params.project(eu);
        let b = params.project(ev);
        let fwd = forward(params, combine(&a, &b));
        let y = if s.y { 1.0 } else { 0.0 };
        total_loss += bce_with_logit(fwd.logit, y);

        // Backward through the MLP.
        let mut delta = vec![sigmoid(fwd.logit) - y];
        for (i, layer) in params.layers.iter().enumerate().rev() {
            let input = &fwd.activations[i];
            let (gw, gb) = &mut grads.layers[i];
            for (c, &dz) in delta.iter().enumerate() {
                gb[c] += dz;
            }
            for (j, &x) in input.iter().enumerate() {
                if x != 0.0 {
                    let grow = gw.row_mut(j);
                    for (c, &dz) in delta.iter().enumerate() {
                        grow[c] += x * dz;
                    }
                }
            }
            if i == 0 {
                // Gradient w.r.t. the combined features.
                let mut dfeat = vec![0.0; layer.weights.rows()];
                for (j, df) in dfeat.iter_mut().enumerate() {
                    let row = layer.weights.row(j);
                    *df = delta.iter().zip(row.iter()).map(|(dz, w)| dz * w).sum();
                }
                // Split into the three blocks and push into a, b.
                let mut da = vec![0.0; d];
                let mut db = vec![0.0; d];
                for k in 0..d {
                    let g_abs = dfeat[k];
                    let g_sum = dfeat[d + k];
                    let g_prod = dfeat[2 * d + k];
                    let sgn = if a[k] > b[k] {
                        1.0
                    } else if a[k] < b[k] {
                        -1.0
                    } else {
                        0.0
                    };
                    da[k] = g_abs * sgn + g_sum + g_prod * b[k];
                    db[k] = -g_abs * sgn + g_sum + g_prod * a[k];
                }
                for (f, &x) in eu.iter().enumerate() {
                    if x != 0.0 {
                        let prow = grads.projection.row_mut(f);
                        for (k, &g) in da.iter().enumerate() {
                            prow[k] += x * g;
                        }
                    }
                }
                for (f, &x) in ev.iter().enumerate() {
                    if x != 0.0 {
                        let prow = grads.projection.row_mut(f);
                        for (k, &g) in db.iter().enumerate() {
                            prow[k] += x * g;
                        }
                    }
                }
            } else {
                let prev_pre = &fwd.pre[i - 1];
                let mut next = vec![0.0; layer.weights.rows()];
                for (j, nx) in next.iter_mut().enumerate() {
                    if prev_pre[j] > 0.0 {
                        let row = layer.weights.row(j);
                        *nx = delta.iter().zip(row.iter()).map(|(dz, w)| dz * w).sum();
                    }
                }
                delta = next;
            }
        }
    }
    let inv = 1.0 / samples.len() as f64;
    grads.scale(inv);
    Ok((total_loss * inv, grads))
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTrainConfig {
    pub proj_dim: usize,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// 0.0 disables the velocity term.
    pub momentum: f64,
    /// Observed different-label edges join the negative pool before random
    /// pairs are sampled to reach 1:1 balance.
    pub include_observed_negatives: bool,
    /// Allowed relative shortfall of negatives before balancing fails.
    pub balance_tol: f64,
    pub seed: u64,
}

impl Default for EdgeTrainConfig {
    fn default() -> Self {
        EdgeTrainConfig {
            proj_dim: 64,
            hidden: vec![64],
            epochs: 200,
            batch_size: 128,
            lr: 0.05,
            momentum: 0.9,
            include_observed_negatives: true,
            balance_tol: 0.0,
            seed: 0,
        }
    }
}

/// Trained parameters plus the mean loss recorded at each epoch.
#[derive(Debug, Clone)]
pub struct EdgeTrainResult {
    pub params: EdgeClassifierParams,
    pub epoch_losses: Vec<f64>,
    pub num_positive: usize,
    pub num_negative: usize,
}

/// Labeled samples for every observed non-self edge whose endpoints both
/// carry known labels.
pub fn observed_edge_samples(g: &Graph, y: &LabelVector) -> Vec<EdgeSample> {
    g.undirected_non_self_edges()
        .filter_map(|(u, v)| match (y.label_of(u), y.label_of(v)) {
            (Some(a), Some(b)) => Some(EdgeSample { u, v, y: a == b }),
            _ => None,
        })
        .collect()
}

fn assemble_training_samples(
    g: &Graph,
    y: &LabelVector,
    cfg: &EdgeTrainConfig,
) -> Result<Vec<EdgeSample>, EdgeModelError> {
    let observed = observed_edge_samples(g, y);
    let positives: Vec<EdgeSample> = observed.iter().copied().filter(|s| s.y).collect();
    if positives.is_empty() {
        return Err(EdgeModelError::EmptySamples);
    }
    let mut negatives: Vec<EdgeSample> = if cfg.include_observed_negatives {
        observed.iter().copied().filter(|s| !s.y).collect()
    } else {
        Vec::new()
    };

    let mut r = rng::substream(cfg.seed, &[0x6e65_6773]);
    if negatives.len() > positives.len() {
        // More observed negatives than positives: balance by seeded
        // subsampling instead of topping up.
        negatives.shuffle(&mut r);
        negatives.truncate(positives.len());
    } else {
        let mut seen: HashSet<(usize, usize)> = negatives.iter().map(|s| (s.u, s.v)).collect();
        let known: Vec<usize> = (0..y.len()).filter(|&v| y.is_known(v)).collect();
        let needed = positives.len() - negatives.len();
        let mut attempts = 0usize;
        let budget = 100 * needed.max(1);
        while negatives.len() < positives.len() && attempts < budget {
            attempts += 1;
            let u = known[r.gen_range(0..known.len())];
            let v = known[r.gen_range(0..known.len())];
            if u == v || y.label_of(u) == y.label_of(v) {
                continue;
            }
            let key = (u.min(v), u.max(v));
            if seen.insert(key) {
                negatives.push(EdgeSample {
                    u: key.0,
                    v: key.1,
                    y: false,
                });
            }
        }
        let shortfall = positives.len() - negatives.len();
        if shortfall as f64 > cfg.balance_tol * positives.len() as f64 {
            return Err(EdgeModelError::CannotBalance {
                needed: positives.len(),
                got: negatives.len(),
            });
        }
    }

    let mut samples = positives;
    samples.extend(negatives);
    Ok(samples)
}

/// Trains projection and MLP jointly; deterministic for a fixed
/// `cfg.seed`. With `cfg.epochs == 0` the seeded initialization is returned
/// unchanged.
pub fn train_edge_classifier(
    embeddings: &FeatureMatrix,
    g: &Graph,
    y: &LabelVector,
    cfg: &EdgeTrainConfig,
) -> Result<EdgeTrainResult, EdgeModelError> {
    if y.len() != g.num_nodes() {
        return Err(EdgeModelError::Graph(GraphError::LabelLengthMismatch {
            expected: g.num_nodes(),
            got: y.len(),
        }));
    }
    if embeddings.rows() != g.num_nodes() {
        return Err(EdgeModelError::Matrix(MatrixError::DimensionMismatch {
            context: "embedding rows",
            expected: g.num_nodes(),
            got: embeddings.rows(),
        }));
    }
    if cfg.batch_size == 0 {
        return Err(EdgeModelError::InvalidConfig("batch_size must be positive".into()));
    }
    let mut samples = assemble_training_samples(g, y, cfg)?;
    let num_positive = samples.iter().filter(|s| s.y).count();
    let num_negative = samples.len() - num_positive;

    let mut params = EdgeClassifierParams::init(embeddings.cols(), cfg.proj_dim, &cfg.hidden, cfg.seed)?;
    let mut velocity = EdgeGradients::zeros_like(&params);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut shuffler = rng::substream(cfg.seed, &[0x7368_7566]);

    for epoch in 0..cfg.epochs {
        samples.shuffle(&mut shuffler);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in samples.chunks(cfg.batch_size) {
            let (loss, grads) = batch_loss_and_gradients(&params, batch, embeddings)?;
            if !loss.is_finite() {
                return Err(EdgeModelError::Diverged { epoch, loss });
            }
            epoch_loss += loss;
            batches += 1;
            apply_update(&mut params, &mut velocity, &grads, cfg.lr, cfg.momentum);
        }
        epoch_losses.push(epoch_loss / batches as f64);
    }
    Ok(EdgeTrainResult {
        params,
        epoch_losses,
        num_positive,
        num_negative,
    })
}

fn apply_update(
    params: &mut EdgeClassifierParams,
    velocity: &mut EdgeGradients,
    grads: &EdgeGradients,
    lr: f64,
    momentum: f64,
) {
    let step = |p: &mut f64, v: &mut f64, g: f64| {
        *v = momentum * *v - lr * g;
        *p += *v;
    };
    for (p, (v, g)) in params.projection.values_mut().iter_mut().zip(
        velocity
            .projection
            .values_mut()
            .iter_mut()
            .zip(grads.projection.values().iter()),
    ) {
        step(p, v, *g);
    }
    for (layer, (vl, gl)) in params
        .layers
        .iter_mut()
        .zip(velocity.layers.iter_mut().zip(grads.layers.iter()))
    {
        for (p, (v, g)) in layer
            .weights
            .values_mut()
            .iter_mut()
            .zip(vl.0.values_mut().iter_mut().zip(gl.0.values().iter()))
        {
            step(p, v, *g);
        }
        for (p, (v, g)) in layer
            .bias
            .iter_mut()
            .zip(vl.1.iter_mut().zip(gl.1.iter()))
        {
            step(p, v, *g);
        }
    }
}

/// Confusion counts and the derived rates. Rates with an empty denominator
/// are reported as absent rather than zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeEvalReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// True-positive rate P(predicted 1 | truly 1).
    pub p: Option<f64>,
    /// False-positive rate P(predicted 1 | truly 0).
    pub q: Option<f64>,
    /// Precision P(truly 1 | predicted 1).
    pub p_pre: Option<f64>,
    pub accuracy: f64,
}

impl EdgeEvalReport {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Result<Self, EdgeModelError> {
        let total = tp + fp + tn + fn_;
        if total == 0 {
            return Err(EdgeModelError::EmptySamples);
        }
        let rate = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        Ok(EdgeEvalReport {
            tp,
            fp,
            tn,
            fn_,
            p: rate(tp, tp + fn_),
            q: rate(fp, fp + tn),
            p_pre: rate(tp, tp + fp),
            accuracy: (tp + tn) as f64 / total as f64,
        })
    }
}

/// Scores every sample and tabulates the confusion matrix at the given
/// threshold (predicted positive iff score > threshold).
pub fn evaluate_edge_classifier(
    params: &EdgeClassifierParams,
    samples: &[EdgeSample],
    embeddings: &FeatureMatrix,
    threshold: f64,
) -> Result<EdgeEvalReport, EdgeModelError> {
    if samples.is_empty() {
        return Err(EdgeModelError::EmptySamples);
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for s in samples {
        let score = predict_edge(params, embeddings.row(s.u), embeddings.row(s.v))?;
        let predicted = score > threshold;
        match (s.y, predicted) {
            (true, true) => tp += 1,
            (true, false) => fn_ += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    EdgeEvalReport::from_counts(tp, fp, tn, fn_)
}

impl PairScorer for EdgeClassifierParams {
    fn score(&self, u: usize, v: usize, embeddings: &FeatureMatrix) -> Result<f64, RefineError> {
        predict_edge(self, embeddings.row(u), embeddings.row(v))
            .map_err(|e| RefineError::Scorer(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_params(d: usize) -> EdgeClassifierParams {
        let mut proj = FeatureMatrix::zeros(d, d);
        for i in 0..d {
            proj.set(i, i, 1.0);
        }
        // Single linear layer summing all features: enough for shape tests.
        let layer = DenseLayer {
            weights: FeatureMatrix::from_values(3 * d, 1, vec![1.0; 3 * d]).unwrap(),
            bias: vec![0.0],
        };
        EdgeClassifierParams::from_parts(proj, vec![layer], 0).unwrap()
    }

    #[test]
    fn featurize_matches_hand_example() {
        let params = identity_params(2);
        let f = featurize_pair(&[1.0, 2.0], &[3.0, -1.0], &params).unwrap();
        assert_eq!(f, vec![2.0, 3.0, 4.0, 1.0, 3.0, -2.0]);
    }

    #[test]
    fn featurize_is_bitwise_symmetric() {
        let params = EdgeClassifierParams::init(5, 3, &[4], 9).unwrap();
        let mut r = rng::stream(33);
        for _ in 0..20 {
            let eu: Vec<f64> = (0..5).map(|_| r.gen_range(-2.0..2.0)).collect();
            let ev: Vec<f64> = (0..5).map(|_| r.gen_range(-2.0..2.0)).collect();
            let fuv = featurize_pair(&eu, &ev, &params).unwrap();
            let fvu = featurize_pair(&ev, &eu, &params).unwrap();
            assert_eq!(fuv, fvu);
        }
    }

    #[test]
    fn featurize_rejects_width_mismatch() {
        let params = identity_params(2);
        assert_eq!(
            featurize_pair(&[1.0], &[1.0, 2.0], &params),
            Err(EdgeModelError::WidthMismatch {
                expected: 2,
                got: 1
            })
        );
    }

    #[test]
    fn zeroed_output_layer_scores_one_half() {
        let mut params = EdgeClassifierParams::init(4, 3, &[5], 1).unwrap();
        let last = params.layers.len() - 1;
        for v in params.layers_mut()[last].weights.values_mut() {
            *v = 0.0;
        }
        params.layers_mut()[last].bias[0] = 0.0;
        let score = predict_edge(&params, &[1.0, -0.5, 2.0, 0.3], &[0.0, 1.0, -1.0, 0.7]).unwrap();
        assert_eq!(score, 0.5);
    }

    #[test]
    fn prediction_is_symmetric() {
        let params = EdgeClassifierParams::init(6, 4, &[8], 5).unwrap();
        let mut r = rng::stream(2);
        for _ in 0..10 {
            let eu: Vec<f64> = (0..6).map(|_| r.gen_range(-1.0..1.0)).collect();
            let ev: Vec<f64> = (0..6).map(|_| r.gen_range(-1.0..1.0)).collect();
            let a = predict_edge(&params, &eu, &ev).unwrap();
            let b = predict_edge(&params, &ev, &eu).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    fn toy_instance() -> (Graph, LabelVector, FeatureMatrix) {
        // Two clusters with clearly separated features; edges inside and
        // across clusters.
        let edges = [
            (0, 1),
            (1, 2),
            (2, 3),
            (0, 3),
            (4, 5),
            (5, 6),
            (6, 7),
            (4, 7),
            (0, 4),
            (2, 6),
        ];
        let g = Graph::build(&edges, 8, true, false).unwrap();
        let y = LabelVector::new(vec![0, 0, 0, 0, 1, 1, 1, 1], 2, None).unwrap();
        let mut x = FeatureMatrix::zeros(8, 2);
        for v in 0..8 {
            let c = if v < 4 { 1.0 } else { -1.0 };
            x.set(v, 0, c + 0.05 * v as f64);
            x.set(v, 1, -c + 0.03 * v as f64);
        }
        (g, y, x)
    }

    fn small_cfg(epochs: usize) -> EdgeTrainConfig {
        EdgeTrainConfig {
            proj_dim: 4,
            hidden: vec![8],
            epochs,
            batch_size: 4,
            lr: 0.1,
            momentum: 0.9,
            seed: 11,
            ..EdgeTrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_returns_seeded_initialization() {
        let (g, y, x) = toy_instance();
        let a = train_edge_classifier(&x, &g, &y, &small_cfg(0)).unwrap();
        let b = train_edge_classifier(&x, &g, &y, &small_cfg(0)).unwrap();
        assert_eq!(a.params, b.params);
        assert!(a.epoch_losses.is_empty());
        let init = EdgeClassifierParams::init(2, 4, &[8], 11).unwrap();
        assert_eq!(a.params, init);
    }

    #[test]
    fn training_is_bit_deterministic_per_seed() {
        let (g, y, x) = toy_instance();
        let a = train_edge_classifier(&x, &g, &y, &small_cfg(30)).unwrap();
        let b = train_edge_classifier(&x, &g, &y, &small_cfg(30)).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.epoch_losses, b.epoch_losses);
        let mut other = small_cfg(30);
        other.seed = 12;
        let c = train_edge_classifier(&x, &g, &y, &other).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn loss_decreases_on_separable_data() {
        let (g, y, x) = toy_instance();
        let out = train_edge_classifier(&x, &g, &y, &small_cfg(60)).unwrap();
        assert!(
            out.epoch_losses[50] < out.epoch_losses[0],
            "loss failed to decrease: {} -> {}",
            out.epoch_losses[0],
            out.epoch_losses[50]
        );
        let samples = observed_edge_samples(&g, &y);
        let report = evaluate_edge_classifier(&out.params, &samples, &x, 0.5).unwrap();
        assert!(report.accuracy >= 0.9, "accuracy {}", report.accuracy);
    }

    #[test]
    fn training_balances_classes() {
        let (g, y, x) = toy_instance();
        let out = train_edge_classifier(&x, &g, &y, &small_cfg(1)).unwrap();
        assert_eq!(out.num_positive, out.num_negative);
        assert_eq!(out.num_positive, 8);
    }

    #[test]
    fn confusion_rates_match_benchmark_style_counts() {
        let r = EdgeEvalReport::from_counts(85, 36, 64, 15).unwrap();
        assert_eq!(r.p, Some(0.85));
        assert_eq!(r.q, Some(0.36));
        assert!((r.p.unwrap() - r.q.unwrap() - 0.49).abs() < 1e-12);
        assert!((r.p_pre.unwrap() - 85.0 / 121.0).abs() < 1e-12);
        assert_eq!(r.accuracy, 149.0 / 200.0);
    }

    #[test]
    fn undefined_rates_are_absent_not_zero() {
        let r = EdgeEvalReport::from_counts(0, 0, 5, 0).unwrap();
        assert_eq!(r.p, None);
        assert_eq!(r.q, Some(0.0));
        assert_eq!(r.p_pre, None);
        assert_eq!(r.accuracy, 1.0);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"p\":null"));
        assert!(json.contains("\"fn\":0"));
    }

    #[test]
    fn observed_samples_skip_unknown_endpoints() {
        let g = Graph::build(&[(0, 1), (1, 2)], 3, true, false).unwrap();
        let y = LabelVector::new(vec![0, 0, 1], 2, Some(vec![true, true, false])).unwrap();
        let samples = observed_edge_samples(&g, &y);
        assert_eq!(samples, vec![EdgeSample { u: 0, v: 1, y: true }]);
    }

    #[test]
    fn empty_positive_pool_is_an_error() {
        let g = Graph::build(&[(0, 1)], 2, true, false).unwrap();
        let y = LabelVector::new(vec![0, 1], 2, None).unwrap();
        let x = FeatureMatrix::zeros(2, 2);
        assert!(matches!(
            train_edge_classifier(&x, &g, &y, &small_cfg(1)),
            Err(EdgeModelError::EmptySamples)
        ));
    }

    #[test]
    fn scorer_trait_matches_predict() {
        let (g, y, x) = toy_instance();
        let out = train_edge_classifier(&x, &g, &y, &small_cfg(5)).unwrap();
        let via_trait = PairScorer::score(&out.params, 0, 5, &x).unwrap();
        let direct = predict_edge(&out.params, x.row(0), x.row(5)).unwrap();
        assert_eq!(via_trait, direct);
    }

    #[test]
    fn gradients_match_central_differences() {
        let (_, _, x) = toy_instance();
        let params = EdgeClassifierParams::init(2, 3, &[4], 21).unwrap();
        let samples = vec![
            EdgeSample { u: 0, v: 5, y: false },
            EdgeSample { u: 1, v: 2, y: true },
            EdgeSample { u: 6, v: 7, y: true },
        ];
        let (_, grads) = batch_loss_and_gradients(&params, &samples, &x).unwrap();
        let h = 1e-6;
        let mut checked = 0usize;
        let mut max_rel = 0.0f64;
        let loss_at = |p: &EdgeClassifierParams| batch_loss_and_gradients(p, &samples, &x).unwrap().0;
        for idx in 0..params.projection.values().len() {
            let mut plus = params.clone();
            plus.projection_mut().values_mut()[idx] += h;
            let mut minus = params.clone();
            minus.projection_mut().values_mut()[idx] -= h;
            let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            let analytic = grads.projection.values()[idx];
            let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
            max_rel = max_rel.max(rel);
            checked += 1;
        }
        assert!(checked > 0);
        assert!(max_rel <= 1e-4, "max relative error {max_rel}");
    }
}
