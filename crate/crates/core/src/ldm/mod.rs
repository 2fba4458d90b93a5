//! Class-conditional latent diffusion: schedule, noise-prediction network,
//! training with label dropout, and guided ancestral sampling.

mod denoiser;
mod loss;
mod sample;
mod schedule;

pub use denoiser::{Denoiser, DenoiserForward, NoisePredictor};
pub use loss::{ldm_loss, ldm_loss_grad, LdmBatch};
pub use sample::{cfg_sample, cfg_sample_batch, conditional_sample, sample_rng};
pub use schedule::{make_schedule, q_sample, DiffusionSchedule};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::nn::{ema_update, zeros_like, AdamConfig, OptimState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdmConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden: usize,
    pub label_dim: usize,
    pub time_dim: usize,
    pub t_max: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub ema_decay: f64,
    /// Probability of replacing a label with the null token during training.
    pub p_uncond: f64,
    pub seed: u64,
}

impl Default for LdmConfig {
    fn default() -> Self {
        Self {
            epochs: 3000,
            batch_size: 64,
            hidden: 512,
            label_dim: 64,
            time_dim: 64,
            t_max: 1000,
            beta_start: 1e-4,
            beta_end: 0.02,
            lr: 2e-4,
            weight_decay: 1e-4,
            ema_decay: 0.995,
            p_uncond: 0.1,
            seed: 0,
        }
    }
}

impl LdmConfig {
    pub fn schedule(&self) -> Result<DiffusionSchedule> {
        make_schedule(self.t_max, self.beta_start, self.beta_end)
    }
}

/// Per-dimension standardization of the training latents. The network is
/// trained and sampled in standardized coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl LatentScaler {
    pub fn fit(z: ArrayView2<f64>) -> Self {
        let mean = z.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(z.ncols()));
        let std = z.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-8 { s } else { 1.0 });
        Self {
            mean: mean.to_vec(),
            std: std.to_vec(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn forward(&self, z: ArrayView2<f64>) -> Array2<f64> {
        let mut out = z.to_owned();
        for mut row in out.rows_mut() {
            for (d, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[d]) / self.std[d];
            }
        }
        out
    }

    pub fn inverse(&self, z: ArrayView2<f64>) -> Array2<f64> {
        let mut out = z.to_owned();
        for mut row in out.rows_mut() {
            for (d, v) in row.iter_mut().enumerate() {
                *v = *v * self.std[d] + self.mean[d];
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainedLdm {
    pub denoiser: Denoiser,
    pub ema: Denoiser,
    pub scaler: LatentScaler,
    /// Mean training loss per epoch.
    pub history: Vec<f64>,
}

pub fn train_ldm(latents: ArrayView2<f64>, labels: &[usize], n_classes: usize, config: &LdmConfig) -> Result<TrainedLdm> {
    train_ldm_observed(latents, labels, n_classes, config, &mut |_, _| {})
}

/// [`train_ldm`] with a callback `(epoch, mean loss)` after every epoch.
pub fn train_ldm_observed(
    latents: ArrayView2<f64>,
    labels: &[usize],
    n_classes: usize,
    config: &LdmConfig,
    on_epoch: &mut dyn FnMut(usize, f64),
) -> Result<TrainedLdm> {
    let n = latents.nrows();
    if labels.len() != n {
        return Err(Error::Shape(format!("{n} latents but {} labels", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::InvalidArgument(format!("label {bad} >= {n_classes} classes")));
    }
    if !(0.0..1.0).contains(&config.p_uncond) {
        return Err(Error::InvalidArgument("p_uncond must lie in [0, 1)".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let sched = config.schedule()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut denoiser = Denoiser::new(
        latents.ncols(),
        n_classes,
        config.hidden,
        config.label_dim,
        config.time_dim,
        &mut rng,
    );
    rng.set_stream(1);
    let scaler = if n > 0 {
        LatentScaler::fit(latents)
    } else {
        LatentScaler::identity(latents.ncols())
    };
    let z = scaler.forward(latents);
    let mut ema = denoiser.clone();
    let mut opt = OptimState::new(AdamConfig::adamw(config.lr, config.weight_decay), &denoiser);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut step = 0;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let z0 = z.select(Axis(0), chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let batch = LdmBatch::draw(&y, z.ncols(), &sched, config.p_uncond, &mut rng);
            let mut grad = zeros_like(&denoiser);
            let loss = ldm_loss_grad(&denoiser, z0.view(), &batch, &sched, &mut grad);
            ensure_finite("diffusion training", step, loss)?;
            opt.step(&mut denoiser, &grad)?;
            ema_update(&mut ema, &denoiser, config.ema_decay);
            total += loss * chunk.len() as f64;
            step += 1;
        }
        let mean = total / n.max(1) as f64;
        on_epoch(epoch, mean);
        history.push(mean);
    }
    Ok(TrainedLdm {
        denoiser,
        ema,
        scaler,
        history,
    })
}

impl TrainedLdm {
    /// Guided samples in the original latent coordinates, drawn with the EMA
    /// weights. Sample `r` uses generator `sample_rng(seed, first_index + r)`.
    pub fn sample(
        &self,
        labels: &[usize],
        omega: f64,
        sched: &DiffusionSchedule,
        seed: u64,
        first_index: u64,
    ) -> Array2<f64> {
        let mut rngs: Vec<ChaCha8Rng> = (0..labels.len())
            .map(|r| sample_rng(seed, first_index + r as u64))
            .collect();
        let z = cfg_sample_batch(&self.ema, labels, omega, sched, self.ema.latent_dim(), &mut rngs);
        self.scaler.inverse(z.view())
    }
}

#[cfg(test)]
mod tests;
