//! Two-phase training: attribute reconstruction first, then the full loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::{gae_loss_grad, BatchPlan, LossParts, LossTerms};
use super::{Gae, GaeConfig, GaeData, GaeEncoder};
use crate::error::{ensure_finite, Error, Result};
use crate::graph::NodeId;
use crate::nn::{ema_update, zeros_like, AdamConfig, Mlp, OptimState, Parameters};

/// Batch-weighted mean loss of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: u8,
    pub loss: LossParts,
}

#[derive(Debug, Clone)]
pub struct TrainedGae {
    pub model: Gae,
    pub ema: Gae,
    pub history: Vec<EpochRecord>,
}

/// The parameters the attribute term depends on.
struct NodePath<'m> {
    encoder: &'m mut GaeEncoder,
    attr: &'m mut Mlp,
}

impl Parameters for NodePath<'_> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &'a [f64])) {
        self.encoder.visit(&format!("{prefix}encoder."), f);
        self.attr.visit(&format!("{prefix}attr."), f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.encoder.visit_mut(f);
        self.attr.visit_mut(f);
    }
}

fn node_path(m: &mut Gae) -> NodePath<'_> {
    NodePath {
        encoder: &mut m.encoder,
        attr: &mut m.decoder.attr,
    }
}

pub fn train_gae(data: &GaeData, config: &GaeConfig) -> Result<TrainedGae> {
    train_gae_observed(data, config, &mut |_| {})
}

/// [`train_gae`] with a callback after every epoch.
///
/// Phase one only steps the encoder and attribute decoder, so the structure
/// heads keep their initial values until phase two. Each phase starts with
/// fresh optimizer moments.
pub fn train_gae_observed(
    data: &GaeData,
    config: &GaeConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainedGae> {
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Gae::new(
        data.inputs.raw().ncols(),
        data.clusters.k(),
        data.clusters.capacity(),
        config,
        &mut rng,
    );
    rng.set_stream(1);
    let mut ema = model.clone();
    let adam = AdamConfig::adam(config.lr, config.weight_decay);
    let mut opt_node = OptimState::new(adam, &node_path(&mut model));
    let mut opt_full = OptimState::new(adam, &model);

    let mut order: Vec<NodeId> = (0..data.n_nodes()).collect();
    let mut history = Vec::new();
    let mut step = 0;
    for epoch in 0..config.phase1_epochs + config.phase2_epochs {
        let phase = if epoch < config.phase1_epochs { 1 } else { 2 };
        order.shuffle(&mut rng);
        let mut sum = LossParts::default();
        for chunk in order.chunks(config.batch_size) {
            let (plan, terms) = if phase == 1 {
                (
                    BatchPlan {
                        nodes: chunk.to_vec(),
                        pairs: Vec::new(),
                    },
                    LossTerms::NodeOnly,
                )
            } else {
                (
                    BatchPlan::sample(data, chunk, config.n_negative, &mut rng),
                    LossTerms::Full,
                )
            };
            let mut grad = zeros_like(&model);
            let parts = gae_loss_grad(&model, data, &plan, terms, &mut grad);
            ensure_finite("gae training", step, parts.total())?;
            if phase == 1 {
                opt_node.step(&mut node_path(&mut model), &node_path(&mut grad))?;
            } else {
                opt_full.step(&mut model, &grad)?;
            }
            ema_update(&mut ema, &model, config.ema_decay);
            let w = chunk.len() as f64 / data.n_nodes() as f64;
            sum.node += w * parts.node;
            sum.inter += w * parts.inter;
            sum.intra += w * parts.intra;
            step += 1;
        }
        let record = EpochRecord { epoch, phase, loss: sum };
        on_epoch(&record);
        history.push(record);
    }
    Ok(TrainedGae { model, ema, history })
}
