//! Graph autoencoder: attention encoder to a latent per node, and a decoder
//! back to attributes and bi-level neighbor maps.

mod decoder;
mod encoder;
mod loss;
mod train;

pub use decoder::GaeDecoder;
pub use encoder::{encode_node, EncoderForward, EncoderInputs, GaeEncoder};
pub use loss::{full_loss, gae_loss, gae_loss_grad, BatchPlan, LossParts, LossTerms};
pub use train::{train_gae, train_gae_observed, EpochRecord, TrainedGae};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::ClusterAssignment;
use crate::error::Result;
use crate::graph::AttributedGraph;
use crate::neighbor_maps::{build_neighbor_maps, NeighborMaps};
use crate::nn::Parameters;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaeConfig {
    pub hidden: usize,
    pub latent_dim: usize,
    /// Epochs on the attribute term alone.
    pub phase1_epochs: usize,
    /// Epochs on the full loss.
    pub phase2_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub ema_decay: f64,
    /// Untouched clusters sampled per node for intra supervision.
    pub n_negative: usize,
    pub positional: bool,
    /// Hidden width of the intra head; 0 makes it a single layer, whose
    /// scores are additive in the latent and the cluster embedding.
    pub intra_hidden: usize,
    pub seed: u64,
}

impl Default for GaeConfig {
    fn default() -> Self {
        Self {
            hidden: 256,
            latent_dim: 64,
            phase1_epochs: 1000,
            phase2_epochs: 1000,
            batch_size: 128,
            lr: 1e-3,
            weight_decay: 1e-5,
            ema_decay: 0.995,
            n_negative: 5,
            positional: true,
            intra_hidden: 256,
            seed: 0,
        }
    }
}

/// Encoder and decoder trained together.
#[derive(Debug, Clone, PartialEq)]
pub struct Gae {
    pub encoder: GaeEncoder,
    pub decoder: GaeDecoder,
}

impl Gae {
    pub fn new<R: Rng + ?Sized>(
        n_features: usize,
        k: usize,
        capacity: usize,
        config: &GaeConfig,
        rng: &mut R,
    ) -> Self {
        let encoder = GaeEncoder::new(n_features, config.hidden, config.latent_dim, rng);
        let decoder = GaeDecoder::new(
            config.latent_dim,
            config.hidden,
            n_features,
            k,
            capacity,
            config.intra_hidden,
            rng,
        );
        Self { encoder, decoder }
    }
}

impl Parameters for Gae {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &'a [f64])) {
        self.encoder.visit(&format!("{prefix}encoder."), f);
        self.decoder.visit(&format!("{prefix}decoder."), f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.encoder.visit_mut(f);
        self.decoder.visit_mut(f);
    }
}

/// The inputs and targets the autoencoder trains on.
#[derive(Debug, Clone)]
pub struct GaeData {
    pub inputs: EncoderInputs,
    pub clusters: ClusterAssignment,
    pub maps: NeighborMaps,
}

impl GaeData {
    pub fn new(g: &AttributedGraph, clusters: ClusterAssignment, positional: bool) -> Result<Self> {
        let maps = build_neighbor_maps(g, &clusters)?;
        Ok(Self {
            inputs: EncoderInputs::new(g, positional),
            clusters,
            maps,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.inputs.n_nodes()
    }
}

#[cfg(test)]
mod tests;
