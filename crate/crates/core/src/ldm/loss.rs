//! Noise-prediction objective with label dropout.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::denoiser::{Denoiser, NoisePredictor};
use super::schedule::DiffusionSchedule;

/// The random choices of one training step.
#[derive(Debug, Clone, PartialEq)]
pub struct LdmBatch {
    pub steps: Vec<usize>,
    pub eps: Array2<f64>,
    /// Labels after dropout to the null token.
    pub labels: Vec<Option<usize>>,
}

impl LdmBatch {
    /// Per sample: a uniform step, a standard normal noise vector, then one
    /// uniform draw deciding label dropout. The number of draws does not
    /// depend on `p_uncond`.
    pub fn draw<R: Rng + ?Sized>(
        labels: &[usize],
        latent_dim: usize,
        sched: &DiffusionSchedule,
        p_uncond: f64,
        rng: &mut R,
    ) -> Self {
        let n = labels.len();
        let mut steps = Vec::with_capacity(n);
        let mut eps = Array2::zeros((n, latent_dim));
        let mut used = Vec::with_capacity(n);
        for (r, &label) in labels.iter().enumerate() {
            steps.push(rng.random_range(1..=sched.t_max()));
            for v in eps.row_mut(r) {
                *v = rng.sample(StandardNormal);
            }
            let u: f64 = rng.random();
            used.push(if u < p_uncond { None } else { Some(label) });
        }
        Self {
            steps,
            eps,
            labels: used,
        }
    }

    /// `z_t` for every row of `z0`.
    pub fn noised(&self, z0: ArrayView2<f64>, sched: &DiffusionSchedule) -> Array2<f64> {
        let mut z_t = z0.to_owned();
        for (r, mut row) in z_t.rows_mut().into_iter().enumerate() {
            let ab = sched.alpha_bar(self.steps[r]);
            row *= ab.sqrt();
            row.scaled_add((1.0 - ab).sqrt(), &self.eps.row(r));
        }
        z_t
    }
}

/// Mean over samples of `‖eps − ε̂‖²`.
pub fn ldm_loss<P: NoisePredictor + ?Sized>(
    den: &P,
    z0: ArrayView2<f64>,
    batch: &LdmBatch,
    sched: &DiffusionSchedule,
) -> f64 {
    let z_t = batch.noised(z0, sched);
    let pred = den.predict(z_t.view(), &batch.steps, &batch.labels);
    (&pred - &batch.eps).mapv(|v| v * v).sum() / z0.nrows().max(1) as f64
}

/// [`ldm_loss`] for the network, adding its gradient into `grad`.
pub fn ldm_loss_grad(
    den: &Denoiser,
    z0: ArrayView2<f64>,
    batch: &LdmBatch,
    sched: &DiffusionSchedule,
    grad: &mut Denoiser,
) -> f64 {
    let z_t = batch.noised(z0, sched);
    let fwd = den.forward(z_t.view(), &batch.steps, &batch.labels);
    let diff = fwd.prediction() - &batch.eps;
    let n = z0.nrows().max(1) as f64;
    let loss = diff.mapv(|v| v * v).sum() / n;
    den.backward(&fwd, (diff * (2.0 / n)).view(), grad);
    loss
}
