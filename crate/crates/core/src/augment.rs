//! Synthetic node generation: sample class-conditioned latents, decode them
//! into attributes and edges to original nodes, and append them to the graph.

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};
use crate::gae::GaeDecoder;
use crate::graph::{AttributedGraph, NodeId, Split};
use crate::ldm::{DiffusionSchedule, TrainedLdm};

/// Score at or above which a map entry counts as set.
pub const THRESHOLD: f64 = 0.5;

/// Decoder outputs needed to wire synthetic nodes, batched over latents.
pub trait StructureDecoder {
    fn attributes(&self, z: ArrayView2<f64>) -> Array2<f64>;
    /// `rows × K` inter-cluster scores.
    fn inter_scores(&self, z: ArrayView2<f64>) -> Array2<f64>;
    /// One row of slot scores per `(latent row, cluster)` pair.
    fn intra_scores(&self, z: ArrayView2<f64>, pairs: &[(usize, usize)]) -> Array2<f64>;
}

impl StructureDecoder for GaeDecoder {
    fn attributes(&self, z: ArrayView2<f64>) -> Array2<f64> {
        self.attr.forward(z).pop().expect("nonempty").out
    }

    fn inter_scores(&self, z: ArrayView2<f64>) -> Array2<f64> {
        self.inter.forward(z).out
    }

    fn intra_scores(&self, z: ArrayView2<f64>, pairs: &[(usize, usize)]) -> Array2<f64> {
        let emb = self.cluster_embeddings().out;
        self.intra_forward(z, &emb, pairs).1.pop().expect("nonempty").out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBatch {
    pub latents: Array2<f64>,
    pub labels: Vec<usize>,
    pub attributes: Array2<f64>,
    /// Original-node neighbors of each synthetic node, ascending.
    pub edges: Vec<Vec<NodeId>>,
}

impl SyntheticBatch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// Rows whose indices are listed, in that order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            latents: self.latents.select(ndarray::Axis(0), rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            attributes: self.attributes.select(ndarray::Axis(0), rows),
            edges: rows.iter().map(|&r| self.edges[r].clone()).collect(),
        }
    }
}

/// Labels in class blocks: `n_per_class` zeros, then ones, and so on.
pub fn class_block_labels(n_classes: usize, n_per_class: usize) -> Vec<usize> {
    (0..n_classes).flat_map(|c| std::iter::repeat_n(c, n_per_class)).collect()
}

/// Draws `n_per_class` guided latents for every class. Sample `r` uses its
/// own generator derived from `(seed, r)`.
pub fn generate_synthetic_latents(
    ldm: &TrainedLdm,
    n_per_class: usize,
    omega: f64,
    sched: &DiffusionSchedule,
    seed: u64,
) -> Result<(Array2<f64>, Vec<usize>)> {
    if omega < 0.0 {
        return Err(Error::InvalidArgument("guidance strength must be nonnegative".into()));
    }
    let labels = class_block_labels(ldm.ema.n_classes(), n_per_class);
    let z = ldm.sample(&labels, omega, sched, seed, 0);
    Ok((z, labels))
}

/// Decodes attributes and edges for each latent.
///
/// Edges come from clusters whose inter score passes [`THRESHOLD`] and, in
/// those, slots whose intra score passes it. A node left without edges is
/// linked to the single existing slot with the largest inter × intra score.
/// With `max_degree`, only the highest-scoring slots are kept.
pub fn decode_synthetic_structures<D: StructureDecoder + ?Sized>(
    dec: &D,
    latents: ArrayView2<f64>,
    clusters: &ClusterAssignment,
    max_degree: Option<usize>,
) -> Result<(Array2<f64>, Vec<Vec<NodeId>>)> {
    if max_degree == Some(0) {
        return Err(Error::InvalidArgument("max degree must be positive".into()));
    }
    let n = latents.nrows();
    let attributes = dec.attributes(latents);
    let inter = dec.inter_scores(latents);
    if inter.ncols() != clusters.k() {
        return Err(Error::Shape(format!(
            "decoder scores {} clusters, assignment has {}",
            inter.ncols(),
            clusters.k()
        )));
    }

    let selected: Vec<(usize, usize)> = (0..n)
        .flat_map(|r| {
            let row = inter.row(r);
            (0..clusters.k()).filter(move |&k| row[k] >= THRESHOLD).map(move |k| (r, k))
        })
        .collect();
    let intra = dec.intra_scores(latents, &selected);

    // (score, cluster, slot) candidates per synthetic node
    let mut picks: Vec<Vec<(f64, usize, usize)>> = vec![Vec::new(); n];
    for (p, &(r, k)) in selected.iter().enumerate() {
        for m in 0..clusters.size(k) {
            let score = intra[[p, m]];
            if score >= THRESHOLD {
                picks[r].push((inter[[r, k]] * score, k, m));
            }
        }
    }

    let lonely: Vec<usize> = (0..n).filter(|&r| picks[r].is_empty()).collect();
    if !lonely.is_empty() {
        let pairs: Vec<(usize, usize)> = lonely
            .iter()
            .flat_map(|&r| (0..clusters.k()).map(move |k| (r, k)))
            .collect();
        let all = dec.intra_scores(latents, &pairs);
        for (p, &(r, k)) in pairs.iter().enumerate() {
            for m in 0..clusters.size(k) {
                let score = inter[[r, k]] * all[[p, m]];
                let best = picks[r].first().map(|b| b.0);
                if best.is_none_or(|b| score > b) {
                    picks[r] = vec![(score, k, m)];
                }
            }
        }
    }

    let edges = picks
        .into_iter()
        .map(|mut cands| {
            if let Some(cap) = max_degree {
                cands.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
                cands.truncate(cap);
            }
            let mut ids: Vec<NodeId> = cands.iter().map(|&(_, k, m)| clusters.members(k)[m]).collect();
            ids.sort_unstable();
            ids.dedup();
            ids
        })
        .collect();
    Ok((attributes, edges))
}

/// The original graph with synthetic nodes appended after the original ids.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedGraph {
    pub graph: AttributedGraph,
    pub n_original: usize,
    pub synthetic: SyntheticBatch,
}

impl AugmentedGraph {
    pub fn n_synthetic(&self) -> usize {
        self.synthetic.len()
    }

    /// Synthetic edges as `(original id, synthetic id)` in augmented ids.
    pub fn synthetic_edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out: Vec<(NodeId, NodeId)> = self
            .synthetic
            .edges
            .iter()
            .enumerate()
            .flat_map(|(r, nbrs)| nbrs.iter().map(move |&j| (j, self.n_original + r)))
            .collect();
        out.sort_unstable();
        out
    }
}

/// Appends the synthetic nodes (split `train`) and their edges.
pub fn assemble_augmented_graph(g: &AttributedGraph, syn: &SyntheticBatch) -> Result<AugmentedGraph> {
    let n = g.n_nodes();
    let m = syn.len();
    if syn.attributes.nrows() != m || syn.edges.len() != m || syn.latents.nrows() != m {
        return Err(Error::Shape("synthetic batch rows disagree".into()));
    }
    if m > 0 && syn.attributes.ncols() != g.n_features() {
        return Err(Error::Shape(format!(
            "synthetic attributes have {} columns, graph has {}",
            syn.attributes.ncols(),
            g.n_features()
        )));
    }
    if let Some(&bad) = syn.edges.iter().flatten().find(|&&j| j >= n) {
        return Err(Error::Shape(format!("synthetic edge to node {bad}, graph has {n}")));
    }
    let mut features = Array2::zeros((n + m, g.n_features()));
    features.slice_mut(s![..n, ..]).assign(g.features());
    if m > 0 {
        features.slice_mut(s![n.., ..]).assign(&syn.attributes);
    }
    let edges = g.edges().iter().copied().chain(
        syn.edges
            .iter()
            .enumerate()
            .flat_map(|(r, nbrs)| nbrs.iter().map(move |&j| (j, n + r))),
    );
    let labels = g.labels().iter().copied().chain(syn.labels.iter().map(|&l| Some(l))).collect();
    let split = g.splits().iter().copied().chain(std::iter::repeat_n(Split::Train, m)).collect();
    let graph = AttributedGraph::new(features, edges, labels, split)?;
    Ok(AugmentedGraph {
        graph,
        n_original: n,
        synthetic: syn.clone(),
    })
}

/// Homophily and average degree of the synthetic structure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticQuality {
    /// Share of synthetic edges whose original endpoint has the synthetic
    /// node's label; `None` without countable edges.
    pub homophily: Option<f64>,
    /// Synthetic edges per synthetic node; `None` without synthetic nodes.
    pub average_degree: Option<f64>,
}

pub fn synthetic_quality(g: &AttributedGraph, syn: &SyntheticBatch) -> SyntheticQuality {
    let mut same = 0usize;
    let mut counted = 0usize;
    for (r, nbrs) in syn.edges.iter().enumerate() {
        for &j in nbrs {
            if let Some(l) = g.label(j) {
                counted += 1;
                same += usize::from(l == syn.labels[r]);
            }
        }
    }
    SyntheticQuality {
        homophily: (counted > 0).then(|| same as f64 / counted as f64),
        average_degree: (!syn.is_empty()).then(|| syn.n_edges() as f64 / syn.len() as f64),
    }
}
