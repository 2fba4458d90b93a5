//! Node encoder: two attention layers over the ego neighborhood plus a direct
//! attribute path, fused into the latent.
//!
//! For a center `i` the first attention layer runs at every `u ∈ N(i)`: at
//! the center over all of `N(i)`, at a leaf `j` over `{j, i}` (the leaf's
//! view of the ego star). The second layer aggregates those outputs at the
//! center. Inputs to both layers are attributes plus positional embeddings.

use std::collections::HashMap;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::graph::{AttributedGraph, NodeId};
use crate::nn::attention::Attended;
use crate::nn::dense::DenseOut;
use crate::nn::embedding::positional_embedding_padded;
use crate::nn::{Activation, AttentionLayer, DenseLayer, Parameters};

#[derive(Debug, Clone, PartialEq)]
pub struct GaeEncoder {
    /// Direct attribute path, `D → h`.
    pub f: DenseLayer,
    pub attn1: AttentionLayer,
    pub attn2: AttentionLayer,
    /// Fusion `2h → D′`.
    pub f_prime: DenseLayer,
}

impl GaeEncoder {
    pub fn new<R: Rng + ?Sized>(n_features: usize, hidden: usize, latent_dim: usize, rng: &mut R) -> Self {
        Self {
            f: DenseLayer::new(n_features, hidden, Activation::Relu, rng),
            attn1: AttentionLayer::new(n_features, hidden, rng),
            attn2: AttentionLayer::new(hidden, hidden, rng),
            f_prime: DenseLayer::new(2 * hidden, latent_dim, Activation::Identity, rng),
        }
    }

    pub fn n_features(&self) -> usize {
        self.f.n_in()
    }

    pub fn hidden(&self) -> usize {
        self.f.n_out()
    }

    pub fn latent_dim(&self) -> usize {
        self.f_prime.n_out()
    }
}

impl Parameters for GaeEncoder {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &'a [f64])) {
        self.f.visit(&format!("{prefix}f."), f);
        self.attn1.visit(&format!("{prefix}attn1."), f);
        self.attn2.visit(&format!("{prefix}attn2."), f);
        self.f_prime.visit(&format!("{prefix}f_prime."), f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.f.visit_mut(f);
        self.attn1.visit_mut(f);
        self.attn2.visit_mut(f);
        self.f_prime.visit_mut(f);
    }
}

/// Raw attributes, position-shifted attributes and closed neighborhoods.
#[derive(Debug, Clone)]
pub struct EncoderInputs {
    raw: Array2<f64>,
    shifted: Array2<f64>,
    hoods: Vec<Vec<NodeId>>,
}

impl EncoderInputs {
    /// With `positional` unset the shifted attributes equal the raw ones.
    pub fn new(g: &AttributedGraph, positional: bool) -> Self {
        let raw = g.features().clone();
        let mut shifted = raw.clone();
        if positional {
            let d = raw.ncols();
            for (u, mut row) in shifted.rows_mut().into_iter().enumerate() {
                row += &positional_embedding_padded(u, d);
            }
        }
        let hoods = (0..g.n_nodes()).map(|i| g.closed_neighborhood(i)).collect();
        Self { raw, shifted, hoods }
    }

    pub fn n_nodes(&self) -> usize {
        self.raw.nrows()
    }

    pub fn raw(&self) -> &Array2<f64> {
        &self.raw
    }

    pub fn hood(&self, i: NodeId) -> &[NodeId] {
        &self.hoods[i]
    }
}

#[derive(Debug, Clone)]
struct Ego {
    /// Rows of the union matrix for `N(i)`, in neighborhood order.
    rows: Vec<usize>,
    center: usize,
    offset: usize,
    t1_hood: Array2<f64>,
    att_center: Attended,
    /// `[t_j; t_i]` and the aggregation for each leaf (None at the center).
    leaves: Vec<Option<(Array2<f64>, Attended)>>,
    att2: Attended,
}

/// Everything the backward pass needs from one batched forward pass.
#[derive(Debug, Clone)]
pub struct EncoderForward {
    x_union: Array2<f64>,
    t1: Array2<f64>,
    egos: Vec<Ego>,
    a1: Array2<f64>,
    t2: Array2<f64>,
    x_batch: Array2<f64>,
    f_out: DenseOut,
    fused: Array2<f64>,
    fp_out: DenseOut,
}

impl EncoderForward {
    /// Latents of the batch, one row per node.
    pub fn latents(&self) -> &Array2<f64> {
        &self.fp_out.out
    }
}

impl GaeEncoder {
    pub fn forward(&self, inputs: &EncoderInputs, batch: &[NodeId]) -> EncoderForward {
        let h = self.hidden();
        let mut union: Vec<NodeId> = batch.iter().flat_map(|&i| inputs.hoods[i].iter().copied()).collect();
        union.sort_unstable();
        union.dedup();
        let row_of: HashMap<NodeId, usize> = union.iter().enumerate().map(|(r, &u)| (u, r)).collect();
        let x_union = inputs.shifted.select(Axis(0), &union);
        let t1 = x_union.dot(&self.attn1.weight.t());

        let mut egos = Vec::with_capacity(batch.len());
        let mut offset = 0;
        for &i in batch {
            let hood = &inputs.hoods[i];
            let rows: Vec<usize> = hood.iter().map(|u| row_of[u]).collect();
            let center = hood.binary_search(&i).expect("closed neighborhood contains the center");
            let ci = rows[center];
            let t1_hood = t1.select(Axis(0), &rows);
            let att_center = self.attn1.attend(t1.row(ci), t1_hood.view());
            let leaves = rows
                .iter()
                .enumerate()
                .map(|(p, &r)| {
                    (p != center).then(|| {
                        let pair = t1.select(Axis(0), &[r, ci]);
                        let att = self.attn1.attend(t1.row(r), pair.view());
                        (pair, att)
                    })
                })
                .collect();
            egos.push(Ego {
                rows,
                center,
                offset,
                t1_hood,
                att_center,
                leaves,
                att2: Attended {
                    raw: Vec::new(),
                    alpha: Vec::new(),
                    pre: Array1::zeros(0),
                    out: Array1::zeros(0),
                },
            });
            offset += hood.len();
        }

        let mut a1 = Array2::zeros((offset, h));
        for ego in &egos {
            for p in 0..ego.rows.len() {
                let src = match &ego.leaves[p] {
                    Some((_, att)) => &att.out,
                    None => &ego.att_center.out,
                };
                a1.row_mut(ego.offset + p).assign(src);
            }
        }
        let t2 = a1.dot(&self.attn2.weight.t());

        let mut z_prime = Array2::zeros((batch.len(), h));
        for (b, ego) in egos.iter_mut().enumerate() {
            let block = t2.slice(s![ego.offset..ego.offset + ego.rows.len(), ..]);
            ego.att2 = self.attn2.attend(block.row(ego.center), block);
            z_prime.row_mut(b).assign(&ego.att2.out);
        }

        let x_batch = inputs.raw.select(Axis(0), batch);
        let f_out = self.f.forward(x_batch.view());
        let mut fused = Array2::zeros((batch.len(), 2 * h));
        fused.slice_mut(s![.., ..h]).assign(&z_prime);
        fused.slice_mut(s![.., h..]).assign(&f_out.out);
        let fp_out = self.f_prime.forward(fused.view());
        EncoderForward {
            x_union,
            t1,
            egos,
            a1,
            t2,
            x_batch,
            f_out,
            fused,
            fp_out,
        }
    }

    /// Accumulates parameter gradients for a latent-gradient `d_latents`.
    pub fn backward(&self, fwd: &EncoderForward, d_latents: ArrayView2<f64>, grad: &mut GaeEncoder) {
        let h = self.hidden();
        let d_fused = self.f_prime.backward(fwd.fused.view(), &fwd.fp_out, d_latents, &mut grad.f_prime);
        self.f.backward_params(
            fwd.x_batch.view(),
            &fwd.f_out,
            d_fused.slice(s![.., h..]),
            &mut grad.f,
        );

        let mut d_t2 = Array2::zeros(fwd.t2.raw_dim());
        for (b, ego) in fwd.egos.iter().enumerate() {
            let len = ego.rows.len();
            let block = fwd.t2.slice(s![ego.offset..ego.offset + len, ..]);
            let mut d_center = Array1::zeros(h);
            self.attn2.attend_backward(
                block.row(ego.center),
                block,
                &ego.att2,
                d_fused.slice(s![b, ..h]),
                &mut grad.attn2,
                d_center.view_mut(),
                d_t2.slice_mut(s![ego.offset..ego.offset + len, ..]),
            );
            d_t2.row_mut(ego.offset + ego.center).scaled_add(1.0, &d_center);
        }
        ndarray::linalg::general_mat_mul(1.0, &d_t2.t(), &fwd.a1, 1.0, &mut grad.attn2.weight);
        let d_a1 = d_t2.dot(&self.attn2.weight);

        let mut d_t1 = Array2::<f64>::zeros(fwd.t1.raw_dim());
        for ego in &fwd.egos {
            let len = ego.rows.len();
            let ci = ego.rows[ego.center];
            let mut d_center = Array1::zeros(h);
            let mut d_hood = Array2::zeros((len, h));
            self.attn1.attend_backward(
                fwd.t1.row(ci),
                ego.t1_hood.view(),
                &ego.att_center,
                d_a1.row(ego.offset + ego.center),
                &mut grad.attn1,
                d_center.view_mut(),
                d_hood.view_mut(),
            );
            d_t1.row_mut(ci).scaled_add(1.0, &d_center);
            for (p, &r) in ego.rows.iter().enumerate() {
                d_t1.row_mut(r).scaled_add(1.0, &d_hood.row(p));
            }
            for (p, leaf) in ego.leaves.iter().enumerate() {
                let Some((pair, att)) = leaf else { continue };
                let r = ego.rows[p];
                let mut d_leaf = Array1::zeros(h);
                let mut d_pair = Array2::zeros((2, h));
                self.attn1.attend_backward(
                    fwd.t1.row(r),
                    pair.view(),
                    att,
                    d_a1.row(ego.offset + p),
                    &mut grad.attn1,
                    d_leaf.view_mut(),
                    d_pair.view_mut(),
                );
                d_t1.row_mut(r).scaled_add(1.0, &(d_leaf + d_pair.row(0)));
                d_t1.row_mut(ci).scaled_add(1.0, &d_pair.row(1));
            }
        }
        ndarray::linalg::general_mat_mul(1.0, &d_t1.t(), &fwd.x_union, 1.0, &mut grad.attn1.weight);
    }

    /// Latent of a single node.
    pub fn encode_node(&self, inputs: &EncoderInputs, i: NodeId) -> Array1<f64> {
        self.forward(inputs, &[i]).fp_out.out.row(0).to_owned()
    }

    /// Latents of every node, computed in chunks of `chunk` nodes.
    pub fn encode_all(&self, inputs: &EncoderInputs, chunk: usize) -> Array2<f64> {
        let n = inputs.n_nodes();
        let mut z = Array2::zeros((n, self.latent_dim()));
        let ids: Vec<NodeId> = (0..n).collect();
        for block in ids.chunks(chunk.max(1)) {
            let fwd = self.forward(inputs, block);
            z.slice_mut(s![block[0]..block[0] + block.len(), ..]).assign(fwd.latents());
        }
        z
    }
}

/// Convenience wrapper building inputs for one node of `g`.
pub fn encode_node(enc: &GaeEncoder, g: &AttributedGraph, i: NodeId) -> Array1<f64> {
    enc.encode_node(&EncoderInputs::new(g, true), i)
}
