//! Reconstruction loss of the autoencoder and its gradient.
//!
//! Per node the loss is `‖X_i − X̂_i‖² + ‖C_i − Ĉ_i‖² + Σ_k ‖M_ik − M̂_ik‖²`,
//! averaged over the batch. The intra sum runs over every cluster the node
//! touches plus a few sampled untouched clusters (all-zero targets), and only
//! over slots that exist in the cluster.

use ndarray::{s, Array2, Axis};
use rand::seq::index::sample;
use rand::Rng;

use super::{Gae, GaeData};
use crate::graph::NodeId;

/// Which terms of the loss are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossTerms {
    /// Attribute reconstruction only.
    NodeOnly,
    Full,
}

/// Nodes of one step and the `(batch row, cluster)` pairs that receive intra
/// supervision.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchPlan {
    pub nodes: Vec<NodeId>,
    pub pairs: Vec<(usize, usize)>,
}

impl BatchPlan {
    /// Touched clusters of every node plus up to `n_negative` untouched ones
    /// drawn uniformly without replacement.
    pub fn sample<R: Rng + ?Sized>(data: &GaeData, nodes: &[NodeId], n_negative: usize, rng: &mut R) -> Self {
        let k = data.maps.k();
        let mut pairs = Vec::new();
        for (b, &i) in nodes.iter().enumerate() {
            let row = data.maps.row(i);
            pairs.extend(row.iter().map(|l| (b, l.cluster)));
            let untouched: Vec<usize> = (0..k).filter(|&c| data.maps.links(i, c).is_none()).collect();
            let take = n_negative.min(untouched.len());
            if take > 0 {
                let mut picked: Vec<usize> = sample(rng, untouched.len(), take).into_iter().map(|p| untouched[p]).collect();
                picked.sort_unstable();
                pairs.extend(picked.into_iter().map(|c| (b, c)));
            }
        }
        Self {
            nodes: nodes.to_vec(),
            pairs,
        }
    }

    /// Touched clusters only.
    pub fn positives(data: &GaeData, nodes: &[NodeId]) -> Self {
        let pairs = nodes
            .iter()
            .enumerate()
            .flat_map(|(b, &i)| data.maps.row(i).iter().map(move |l| (b, l.cluster)))
            .collect();
        Self {
            nodes: nodes.to_vec(),
            pairs,
        }
    }
}

/// Batch-mean values of each loss term.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub node: f64,
    pub inter: f64,
    pub intra: f64,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.node + self.inter + self.intra
    }
}

/// Loss value only.
pub fn gae_loss(model: &Gae, data: &GaeData, plan: &BatchPlan, terms: LossTerms) -> LossParts {
    evaluate(model, data, plan, terms, None)
}

/// Loss value; gradients are added into `grad`.
pub fn gae_loss_grad(model: &Gae, data: &GaeData, plan: &BatchPlan, terms: LossTerms, grad: &mut Gae) -> LossParts {
    evaluate(model, data, plan, terms, Some(grad))
}

fn evaluate(model: &Gae, data: &GaeData, plan: &BatchPlan, terms: LossTerms, grad: Option<&mut Gae>) -> LossParts {
    let nodes = &plan.nodes;
    let scale = 1.0 / nodes.len().max(1) as f64;
    let enc = &model.encoder;
    let dec = &model.decoder;
    let fwd = enc.forward(&data.inputs, nodes);
    let z = fwd.latents();

    let attr_outs = dec.attr.forward(z.view());
    let x_target = data.inputs.raw().select(Axis(0), nodes);
    let d_x = &attr_outs.last().expect("nonempty").out - &x_target;
    let mut parts = LossParts {
        node: d_x.mapv(|v| v * v).sum() * scale,
        ..Default::default()
    };

    let full = terms == LossTerms::Full;
    let mut structure = None;
    if full {
        let inter_out = dec.inter.forward(z.view());
        let mut c_target = Array2::zeros(inter_out.out.raw_dim());
        for (b, &i) in nodes.iter().enumerate() {
            for l in data.maps.row(i) {
                c_target[[b, l.cluster]] = 1.0;
            }
        }
        let d_c = &inter_out.out - &c_target;
        parts.inter = d_c.mapv(|v| v * v).sum() * scale;

        let emb = dec.cluster_embeddings();
        let (intra_in, intra_out) = dec.intra_forward(z.view(), &emb.out, &plan.pairs);
        let mut d_m = Array2::zeros((plan.pairs.len(), dec.capacity()));
        let mut intra = 0.0;
        for (r, &(b, k)) in plan.pairs.iter().enumerate() {
            let i = nodes[b];
            let size = data.clusters.size(k);
            let mut target = vec![0.0; dec.capacity()];
            if let Some(l) = data.maps.links(i, k) {
                for &m in &l.slots {
                    target[m] = 1.0;
                }
            }
            let scores = &intra_out.last().expect("nonempty").out;
            for m in 0..size {
                let diff = scores[[r, m]] - target[m];
                intra += diff * diff;
                d_m[[r, m]] = diff;
            }
        }
        parts.intra = intra * scale;
        structure = Some((inter_out, d_c, emb, intra_in, intra_out, d_m));
    }

    let Some(grad) = grad else { return parts };

    let d_x = d_x * (2.0 * scale);
    let mut d_z = dec
        .attr
        .backward(z.view(), &attr_outs, d_x.view(), &mut grad.decoder.attr, true)
        .expect("input gradient requested");

    if let Some((inter_out, d_c, emb, intra_in, intra_out, d_m)) = structure {
        let d_c = d_c * (2.0 * scale);
        d_z += &dec.inter.backward(z.view(), &inter_out, d_c.view(), &mut grad.decoder.inter);

        let d_m = d_m * (2.0 * scale);
        let d_in = dec
            .intra
            .backward(intra_in.view(), &intra_out, d_m.view(), &mut grad.decoder.intra, true)
            .expect("input gradient requested");
        let dl = dec.latent_dim();
        let mut d_emb = Array2::zeros(emb.out.raw_dim());
        for (r, &(b, k)) in plan.pairs.iter().enumerate() {
            d_z.row_mut(b).scaled_add(1.0, &d_in.slice(s![r, ..dl]));
            d_emb.row_mut(k).scaled_add(1.0, &d_in.slice(s![r, dl..]));
        }
        let d_table = dec.cluster_mlp.backward(
            dec.cluster_table.view(),
            &emb,
            d_emb.view(),
            &mut grad.decoder.cluster_mlp,
        );
        grad.decoder.cluster_table += &d_table;
    }

    enc.backward(&fwd, d_z.view(), &mut grad.encoder);
    parts
}

/// Full loss over every node, with untouched clusters drawn from `seed`.
pub fn full_loss(model: &Gae, data: &GaeData, n_negative: usize, seed: u64) -> LossParts {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<NodeId> = (0..data.n_nodes()).collect();
    let mut total = LossParts::default();
    for chunk in nodes.chunks(256) {
        let plan = BatchPlan::sample(data, chunk, n_negative, &mut rng);
        let p = gae_loss(model, data, &plan, LossTerms::Full);
        let w = chunk.len() as f64 / nodes.len() as f64;
        total.node += w * p.node;
        total.inter += w * p.inter;
        total.intra += w * p.intra;
    }
    total
}
