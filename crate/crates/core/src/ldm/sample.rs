//! Ancestral sampling with classifier-free guidance.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::denoiser::NoisePredictor;
use super::schedule::DiffusionSchedule;

/// One reverse step: `(z − β_t/√(1−ᾱ_t)·ε)/√α_t`, plus `ρ_t·noise` when `t > 1`.
fn reverse_step(z: &mut Array2<f64>, eps: &Array2<f64>, t: usize, sched: &DiffusionSchedule, noise: Option<&Array2<f64>>) {
    let coef = sched.beta(t) / (1.0 - sched.alpha_bar(t)).sqrt();
    let scale = 1.0 / sched.alpha(t).sqrt();
    z.scaled_add(-coef, eps);
    *z *= scale;
    if let Some(noise) = noise {
        z.scaled_add(sched.sigma(t), noise);
    }
}

fn draw_rows(rngs: &mut [ChaCha8Rng], dim: usize) -> Array2<f64> {
    let mut out = Array2::zeros((rngs.len(), dim));
    for (mut row, rng) in out.rows_mut().into_iter().zip(rngs.iter_mut()) {
        for v in row.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
    }
    out
}

/// Samples one latent per entry of `labels`, each row driven by its own
/// generator, with guided noise `(1+ω)·ε_cond − ω·ε_uncond`.
///
/// Rows never interact, so the result for a row does not depend on which
/// other rows share the batch.
pub fn cfg_sample_batch<P: NoisePredictor + ?Sized>(
    den: &P,
    labels: &[usize],
    omega: f64,
    sched: &DiffusionSchedule,
    latent_dim: usize,
    rngs: &mut [ChaCha8Rng],
) -> Array2<f64> {
    assert_eq!(labels.len(), rngs.len(), "one generator per sample");
    let n = labels.len();
    let mut z = draw_rows(rngs, latent_dim);
    let cond: Vec<Option<usize>> = labels.iter().map(|&l| Some(l)).collect();
    let uncond = vec![None; n];
    for t in (1..=sched.t_max()).rev() {
        let steps = vec![t; n];
        let e_c = den.predict(z.view(), &steps, &cond);
        let e_u = den.predict(z.view(), &steps, &uncond);
        let eps = e_c * (1.0 + omega) - e_u * omega;
        let noise = (t > 1).then(|| draw_rows(rngs, latent_dim));
        reverse_step(&mut z, &eps, t, sched, noise.as_ref());
    }
    z
}

/// Guided sample of a single latent.
pub fn cfg_sample<P: NoisePredictor + ?Sized>(
    den: &P,
    label: usize,
    omega: f64,
    sched: &DiffusionSchedule,
    latent_dim: usize,
    rng: &mut ChaCha8Rng,
) -> Array1<f64> {
    let mut rngs = [rng.clone()];
    let z = cfg_sample_batch(den, &[label], omega, sched, latent_dim, &mut rngs);
    *rng = rngs[0].clone();
    z.row(0).to_owned()
}

/// Plain conditional ancestral sampling (no unconditional branch).
pub fn conditional_sample<P: NoisePredictor + ?Sized>(
    den: &P,
    label: usize,
    sched: &DiffusionSchedule,
    latent_dim: usize,
    rng: &mut ChaCha8Rng,
) -> Array1<f64> {
    let mut z = Array2::from_shape_fn((1, latent_dim), |_| rng.sample(StandardNormal));
    for t in (1..=sched.t_max()).rev() {
        let eps = den.predict(z.view(), &[t], &[Some(label)]);
        let noise = (t > 1).then(|| Array2::from_shape_fn((1, latent_dim), |_| rng.sample(StandardNormal)));
        reverse_step(&mut z, &eps, t, sched, noise.as_ref());
    }
    z.row(0).to_owned()
}

/// Generator for sample `index` of a run seeded with `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
