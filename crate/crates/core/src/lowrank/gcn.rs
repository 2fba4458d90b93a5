//! Two-layer GCN feature extractor with a linear classifier, trained on
//! cross-entropy plus a truncated nuclear norm penalty on its features.

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::spectrum::{kept_rank, truncated_nuclear_norm};
use crate::error::{ensure_finite, Error, Result};
use crate::graph::{AttributedGraph, NodeId, Split};
use crate::nn::init::glorot_uniform;
use crate::nn::{AdamConfig, OptimState, Parameters};
use crate::sparse::Csr;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GcnConfig {
    pub hidden: usize,
    /// Width of the penultimate features.
    pub feat_dim: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Return the weights from the epoch with the best validation accuracy
    /// instead of the last ones.
    pub keep_best: bool,
    pub seed: u64,
}

impl Default for GcnConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            feat_dim: 64,
            dropout: 0.5,
            epochs: 200,
            lr: 0.01,
            weight_decay: 5e-4,
            keep_best: true,
            seed: 0,
        }
    }
}

/// Truncated nuclear norm weight and rank ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LowRankConfig {
    pub tau: f64,
    pub gamma: f64,
}

impl Default for LowRankConfig {
    fn default() -> Self {
        Self { tau: 0.0, gamma: 0.2 }
    }
}

impl LowRankConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau {} must be nonnegative", self.tau)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidArgument(format!("gamma {} must be in (0, 1)", self.gamma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    /// `D × hidden`.
    pub w1: Array2<f64>,
    /// `hidden × feat_dim`.
    pub w2: Array2<f64>,
    /// `feat_dim × classes`.
    pub classifier: Array2<f64>,
}

impl Parameters for GcnModel {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &'a [f64])) {
        self.w1.visit(&format!("{prefix}w1"), f);
        self.w2.visit(&format!("{prefix}w2"), f);
        self.classifier.visit(&format!("{prefix}classifier"), f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.w1.visit_mut(f);
        self.w2.visit_mut(f);
        self.classifier.visit_mut(f);
    }
}

impl GcnModel {
    pub fn new<R: Rng + ?Sized>(n_features: usize, n_classes: usize, cfg: &GcnConfig, rng: &mut R) -> Self {
        Self {
            w1: glorot_uniform(n_features, cfg.hidden, rng),
            w2: glorot_uniform(cfg.hidden, cfg.feat_dim, rng),
            classifier: glorot_uniform(cfg.feat_dim, n_classes, rng),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.classifier.ncols()
    }
}

/// Sparse attributes, normalized adjacency `D̃^{-1/2}(A + I)D̃^{-1/2}` and
/// labels of a graph, prepared once.
#[derive(Debug, Clone)]
pub struct GcnInputs {
    pub x: Csr,
    pub adj: Csr,
    pub labels: Vec<Option<usize>>,
    pub n_classes: usize,
}

impl GcnInputs {
    pub fn new(g: &AttributedGraph) -> Self {
        Self {
            x: Csr::from_dense(g.features().view()),
            adj: normalized_adjacency(g),
            labels: g.labels().to_vec(),
            n_classes: g.n_classes(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }
}

pub fn normalized_adjacency(g: &AttributedGraph) -> Csr {
    let n = g.n_nodes();
    let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / ((g.degree(i) + 1) as f64).sqrt()).collect();
    let mut triplets = Vec::with_capacity(n + 2 * g.n_edges());
    for i in 0..n {
        triplets.push((i, i, inv_sqrt[i] * inv_sqrt[i]));
        for &j in g.neighbors(i) {
            triplets.push((i, j, inv_sqrt[i] * inv_sqrt[j]));
        }
    }
    Csr::from_triplets(n, n, triplets)
}

/// Intermediate values kept for the backward pass.
struct Trace {
    x: Csr,
    a1: Array2<f64>,
    mask1: Option<Array2<f64>>,
    h1: Array2<f64>,
    a2: Array2<f64>,
    h: Array2<f64>,
    logits: Array2<f64>,
}

fn relu(a: &Array2<f64>) -> Array2<f64> {
    a.mapv(|v| v.max(0.0))
}

/// Inverted dropout mask with entries `0` or `1/(1−p)`.
fn dropout_mask<R: Rng + ?Sized>(shape: (usize, usize), p: f64, rng: &mut R) -> Array2<f64> {
    let keep = 1.0 / (1.0 - p);
    Array2::from_shape_simple_fn(shape, || if rng.random::<f64>() < p { 0.0 } else { keep })
}

fn sparse_dropout<R: Rng + ?Sized>(x: &Csr, p: f64, rng: &mut R) -> Csr {
    let keep = 1.0 / (1.0 - p);
    let mut triplets = Vec::with_capacity(x.nnz());
    for r in 0..x.n_rows() {
        for (c, v) in x.row(r) {
            if rng.random::<f64>() >= p {
                triplets.push((r, c, v * keep));
            }
        }
    }
    Csr::from_triplets(x.n_rows(), x.n_cols(), triplets)
}

fn forward<R: Rng + ?Sized>(model: &GcnModel, inputs: &GcnInputs, dropout: Option<(f64, &mut R)>) -> Trace {
    let (x, mask1) = match dropout {
        Some((p, rng)) if p > 0.0 => {
            let x = sparse_dropout(&inputs.x, p, rng);
            let mask = dropout_mask((inputs.n_nodes(), model.w1.ncols()), p, rng);
            (x, Some(mask))
        }
        _ => (inputs.x.clone(), None),
    };
    let a1 = inputs.adj.dot(x.dot(model.w1.view()).view());
    let h1 = relu(&a1);
    let h1_in = match &mask1 {
        Some(m) => &h1 * m,
        None => h1.clone(),
    };
    let a2 = inputs.adj.dot(h1_in.dot(&model.w2).view());
    let h = relu(&a2);
    let logits = h.dot(&model.classifier);
    Trace {
        x,
        a1,
        mask1,
        h1: h1_in,
        a2,
        h,
        logits,
    }
}

/// Penultimate features `H` and logits `H W` in evaluation mode.
pub fn gcn_forward(model: &GcnModel, inputs: &GcnInputs) -> (Array2<f64>, Array2<f64>) {
    let t = forward::<ChaCha8Rng>(model, inputs, None);
    (t.h, t.logits)
}

/// Mean cross-entropy over `nodes` and its gradient with respect to the
/// logits (zero on other rows).
fn cross_entropy(logits: ArrayView2<f64>, labels: &[Option<usize>], nodes: &[NodeId]) -> (f64, Array2<f64>) {
    let mut grad = Array2::zeros(logits.raw_dim());
    let m = nodes.len() as f64;
    let mut loss = 0.0;
    for &i in nodes {
        let y = labels[i].expect("training nodes are labeled");
        let row = logits.row(i);
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let exp: Array1<f64> = row.mapv(|v| (v - max).exp());
        let sum = exp.sum();
        loss += sum.ln() + max - row[y];
        let mut g = grad.row_mut(i);
        g.assign(&(exp / (sum * m)));
        g[y] -= 1.0 / m;
    }
    (loss / m, grad)
}

fn backward(model: &GcnModel, inputs: &GcnInputs, t: &Trace, d_logits: &Array2<f64>, d_h_extra: Option<&Array2<f64>>) -> GcnModel {
    let classifier = t.h.t().dot(d_logits);
    let mut d_h = d_logits.dot(&model.classifier.t());
    if let Some(extra) = d_h_extra {
        d_h += extra;
    }
    let d_a2 = d_h * t.a2.mapv(|v| f64::from(v > 0.0));
    let d_p2 = inputs.adj.t_dot(d_a2.view());
    let w2 = t.h1.t().dot(&d_p2);
    let mut d_h1 = d_p2.dot(&model.w2.t());
    if let Some(m) = &t.mask1 {
        d_h1 *= m;
    }
    let d_a1 = d_h1 * t.a1.mapv(|v| f64::from(v > 0.0));
    let d_p1 = inputs.adj.t_dot(d_a1.view());
    let w1 = t.x.t_dot(d_p1.view());
    GcnModel { w1, w2, classifier }
}

/// Labeled training nodes and validation nodes for one training run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSets {
    pub train: Vec<NodeId>,
    pub val: Vec<NodeId>,
    pub test: Vec<NodeId>,
}

impl NodeSets {
    /// Labeled nodes of each split.
    pub fn from_graph(g: &AttributedGraph) -> Self {
        let labeled = |s| g.nodes_in(s).into_iter().filter(|&i| g.label(i).is_some()).collect();
        Self {
            train: labeled(Split::Train),
            val: labeled(Split::Val),
            test: labeled(Split::Test),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcnEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    /// Truncated nuclear norm of the training-mode features; `None` when the
    /// penalty is off.
    pub tnn: Option<f64>,
    pub val_acc: Option<f64>,
    pub test_acc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainedGcn {
    pub model: GcnModel,
    /// Epoch of the returned weights, 1-based; 0 for the initialization.
    pub best_epoch: usize,
    pub history: Vec<GcnEpoch>,
}

/// Full-batch Adam on mean cross-entropy over `sets.train` plus
/// `τ · ‖H‖_{r0}`. The penalty uses training-mode features and is skipped
/// entirely when `τ = 0`.
pub fn train_node_classifier(
    inputs: &GcnInputs,
    sets: &NodeSets,
    lowrank: &LowRankConfig,
    cfg: &GcnConfig,
) -> Result<TrainedGcn> {
    lowrank.validate()?;
    if sets.train.is_empty() {
        return Err(Error::InvalidArgument("no labeled training nodes".into()));
    }
    if let Some(&i) = sets.train.iter().find(|&&i| inputs.labels.get(i).copied().flatten().is_none()) {
        return Err(Error::InvalidArgument(format!("training node {i} has no label")));
    }
    if !(0.0..1.0).contains(&cfg.dropout) {
        return Err(Error::InvalidArgument(format!("dropout {} must be in [0, 1)", cfg.dropout)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = GcnModel::new(inputs.x.n_cols(), inputs.n_classes, cfg, &mut rng);
    let mut opt = OptimState::new(AdamConfig::adam(cfg.lr, cfg.weight_decay), &model);
    let r0 = kept_rank(lowrank.gamma, inputs.n_nodes(), cfg.feat_dim);

    let evaluate = |m: &GcnModel| {
        let (_, logits) = gcn_forward(m, inputs);
        (
            accuracy_on(logits.view(), &inputs.labels, &sets.val).ok(),
            accuracy_on(logits.view(), &inputs.labels, &sets.test).ok(),
        )
    };
    let mut best = (evaluate(&model).0.unwrap_or(0.0), 0, model.clone());
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let trace = forward(&model, inputs, Some((cfg.dropout, &mut rng)));
        let (ce, d_logits) = cross_entropy(trace.logits.view(), &inputs.labels, &sets.train);
        let (tnn, d_h) = if lowrank.tau > 0.0 {
            let (v, g) = truncated_nuclear_norm(trace.h.view(), r0)?;
            (Some(v), Some(g * lowrank.tau))
        } else {
            (None, None)
        };
        let loss = ce + lowrank.tau * tnn.unwrap_or(0.0);
        ensure_finite("gcn", epoch, loss)?;
        let grad = backward(&model, inputs, &trace, &d_logits, d_h.as_ref());
        opt.step(&mut model, &grad)?;

        let (val_acc, test_acc) = evaluate(&model);
        if cfg.keep_best && val_acc.is_some_and(|a| a > best.0) {
            best = (val_acc.unwrap(), epoch, model.clone());
        }
        history.push(GcnEpoch {
            epoch,
            train_loss: loss,
            tnn,
            val_acc,
            test_acc,
        });
    }
    let (model, best_epoch) = if cfg.keep_best && !sets.val.is_empty() {
        (best.2, best.1)
    } else {
        (model, cfg.epochs)
    };
    Ok(TrainedGcn {
        model,
        best_epoch,
        history,
    })
}

/// Argmax accuracy over the labeled nodes in `nodes`; ties go to the lowest
/// class.
pub fn accuracy_on(logits: ArrayView2<f64>, labels: &[Option<usize>], nodes: &[NodeId]) -> Result<f64> {
    let mut hit = 0usize;
    let mut total = 0usize;
    for &i in nodes {
        let Some(y) = labels[i] else { continue };
        total += 1;
        let row = logits.row(i);
        let pred = row
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (c, &v)| if v > best.1 { (c, v) } else { best })
            .0;
        hit += usize::from(pred == y);
    }
    if total == 0 {
        return Err(Error::InvalidArgument("no labeled nodes to evaluate".into()));
    }
    Ok(hit as f64 / total as f64)
}

/// Accuracy of `model` on the labeled nodes of `split`.
pub fn evaluate_accuracy(model: &GcnModel, g: &AttributedGraph, split: Split) -> Result<f64> {
    let inputs = GcnInputs::new(g);
    let (_, logits) = gcn_forward(model, &inputs);
    accuracy_on(logits.view(), g.labels(), &g.nodes_in(split))
}

/// `‖H‖_{r0}` of the evaluation-mode features.
pub fn feature_tnn(model: &GcnModel, inputs: &GcnInputs, gamma: f64) -> Result<f64> {
    let (h, _) = gcn_forward(model, inputs);
    let r0 = kept_rank(gamma, h.nrows(), h.ncols());
    Ok(truncated_nuclear_norm(h.view(), r0)?.0)
}

/// One-hot label matrix with rows only for `nodes`.
pub fn one_hot(labels: &[Option<usize>], nodes: &[NodeId], n_classes: usize) -> Array2<f64> {
    let mut y = Array2::zeros((labels.len(), n_classes));
    for &i in nodes {
        if let Some(c) = labels[i] {
            y[[i, c]] = 1.0;
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::toy::PlantedPartition;
    use crate::nn::{flatten, grad_check, unflatten};
    use ndarray::array;

    fn tiny_graph() -> AttributedGraph {
        AttributedGraph::new(
            array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.0]],
            [(0, 1), (1, 2)],
            vec![Some(0), Some(1), Some(1), Some(0)],
            vec![Split::Train, Split::Train, Split::Val, Split::Test],
        )
        .unwrap()
    }

    #[test]
    fn lone_node_normalization_is_one() {
        let g = AttributedGraph::new(array![[2.0, -1.0]], [], vec![Some(0)], vec![Split::Train]).unwrap();
        let inputs = GcnInputs::new(&g);
        assert_eq!(inputs.adj.to_dense(), array![[1.0]]);
        let model = GcnModel {
            w1: Array2::eye(2),
            w2: Array2::eye(2),
            classifier: array![[1.0], [1.0]],
        };
        let (h, logits) = gcn_forward(&model, &inputs);
        assert_eq!(h, array![[2.0, 0.0]]);
        assert_eq!(logits, array![[2.0]]);
    }

    #[test]
    fn path_normalization_by_hand() {
        let g = tiny_graph();
        let a = normalized_adjacency(&g).to_dense();
        // degrees with self-loops: 2, 3, 2, 1
        let expect = array![
            [0.5, 1.0 / 6f64.sqrt(), 0.0, 0.0],
            [1.0 / 6f64.sqrt(), 1.0 / 3.0, 1.0 / 6f64.sqrt(), 0.0],
            [0.0, 1.0 / 6f64.sqrt(), 0.5, 0.0],
            [0.0, 0.0, 0.0, 1.0]
        ];
        assert!((&a - &expect).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn logits_shape() {
        let g = tiny_graph();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = GcnModel::new(2, 2, &GcnConfig::default(), &mut rng);
        let (h, logits) = gcn_forward(&model, &GcnInputs::new(&g));
        assert_eq!(h.dim(), (4, 64));
        assert_eq!(logits.dim(), (4, 2));
    }

    #[test]
    fn accuracy_cases() {
        let labels = vec![Some(0), Some(1), Some(2), Some(0), None];
        let perfect = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [3.0, 1.0, 1.0], [0.0, 0.0, 0.0]];
        assert_eq!(accuracy_on(perfect.view(), &labels, &[0, 1, 2, 3, 4]).unwrap(), 1.0);
        let uniform = Array2::zeros((5, 3));
        assert_eq!(accuracy_on(uniform.view(), &labels, &[0, 1, 2, 3]).unwrap(), 0.5);
        assert!(accuracy_on(uniform.view(), &labels, &[]).is_err());
        assert!(accuracy_on(uniform.view(), &labels, &[4]).is_err());
    }

    #[test]
    fn loss_gradient_matches_differences() {
        let g = PlantedPartition {
            n_nodes: 12,
            n_classes: 3,
            n_features: 5,
            seed: 4,
            ..Default::default()
        }
        .generate();
        let inputs = GcnInputs::new(&g);
        let cfg = GcnConfig {
            hidden: 4,
            feat_dim: 6,
            ..Default::default()
        };
        let train: Vec<NodeId> = (0..12).step_by(2).collect();
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = GcnModel::new(5, 3, &cfg, &mut rng);
            let mask_seed = 50 + seed;
            let tau = 0.3;
            let r0 = 2;
            let mut probe = model.clone();
            let check = grad_check(
                |w| {
                    unflatten(&mut probe, w);
                    let mut rng = ChaCha8Rng::seed_from_u64(mask_seed);
                    let t = forward(&probe, &inputs, Some((0.3, &mut rng)));
                    let (ce, d_logits) = cross_entropy(t.logits.view(), &inputs.labels, &train);
                    let (v, dh) = truncated_nuclear_norm(t.h.view(), r0).unwrap();
                    let grad = backward(&probe, &inputs, &t, &d_logits, Some(&(dh * tau)));
                    (ce + tau * v, flatten(&grad))
                },
                &flatten(&model),
                1e-6,
            );
            assert!(check.max_rel_error < 1e-4, "seed {seed}: {check:?}");
        }
    }

    fn toy() -> AttributedGraph {
        PlantedPartition {
            n_nodes: 120,
            n_classes: 3,
            n_features: 20,
            p_in: 0.08,
            p_out: 0.01,
            seed: 9,
            ..Default::default()
        }
        .generate()
    }

    fn small_cfg() -> GcnConfig {
        GcnConfig {
            hidden: 16,
            feat_dim: 16,
            epochs: 60,
            ..Default::default()
        }
    }

    #[test]
    fn zero_penalty_matches_plain_training() {
        let g = toy();
        let inputs = GcnInputs::new(&g);
        let sets = NodeSets::from_graph(&g);
        let a = train_node_classifier(&inputs, &sets, &LowRankConfig::default(), &small_cfg()).unwrap();
        let b = train_node_classifier(&inputs, &sets, &LowRankConfig { tau: 0.0, gamma: 0.7 }, &small_cfg()).unwrap();
        assert_eq!(flatten(&a.model), flatten(&b.model));
        assert!(a.history.iter().all(|e| e.tnn.is_none()));
    }

    #[test]
    fn training_learns_toy_classes() {
        let g = toy();
        let inputs = GcnInputs::new(&g);
        let sets = NodeSets::from_graph(&g);
        let t = train_node_classifier(&inputs, &sets, &LowRankConfig::default(), &small_cfg()).unwrap();
        let first = t.history[0].train_loss;
        let last = t.history.last().unwrap().train_loss;
        assert!(last < first);
        let (_, logits) = gcn_forward(&t.model, &inputs);
        assert!(accuracy_on(logits.view(), &inputs.labels, &sets.test).unwrap() > 0.6);
    }

    #[test]
    fn penalty_shrinks_trailing_spectrum() {
        let g = toy();
        let inputs = GcnInputs::new(&g);
        let sets = NodeSets::from_graph(&g);
        let cfg = GcnConfig { keep_best: false, ..small_cfg() };
        let plain = train_node_classifier(&inputs, &sets, &LowRankConfig::default(), &cfg).unwrap();
        let reg = LowRankConfig { tau: 0.1, gamma: 0.2 };
        let low = train_node_classifier(&inputs, &sets, &reg, &cfg).unwrap();
        let a = feature_tnn(&plain.model, &inputs, 0.2).unwrap();
        let b = feature_tnn(&low.model, &inputs, 0.2).unwrap();
        assert!(b < a, "{b} !< {a}");
    }

    #[test]
    fn invalid_configs_rejected() {
        let g = tiny_graph();
        let inputs = GcnInputs::new(&g);
        let sets = NodeSets::from_graph(&g);
        let cfg = small_cfg();
        assert!(train_node_classifier(&inputs, &sets, &LowRankConfig { tau: -1.0, gamma: 0.2 }, &cfg).is_err());
        assert!(train_node_classifier(&inputs, &sets, &LowRankConfig { tau: 0.1, gamma: 1.0 }, &cfg).is_err());
        let none = NodeSets { train: vec![], ..sets };
        assert!(train_node_classifier(&inputs, &none, &LowRankConfig::default(), &cfg).is_err());
    }
}
