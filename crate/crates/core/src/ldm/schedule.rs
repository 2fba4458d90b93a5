//! Linear variance schedule and the closed-form forward marginal.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSchedule {
    t_max: usize,
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
    sigmas: Vec<f64>,
}

/// Linear `β` from `beta_start` to `beta_end` over `t_max` steps, with
/// ancestral noise scale `ρ_t = √β_t`.
pub fn make_schedule(t_max: usize, beta_start: f64, beta_end: f64) -> Result<DiffusionSchedule> {
    if t_max == 0 {
        return Err(Error::InvalidArgument("schedule needs at least one step".into()));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < beta_start <= beta_end < 1, got {beta_start}..{beta_end}"
        )));
    }
    let betas: Vec<f64> = (0..t_max)
        .map(|i| {
            if t_max == 1 {
                beta_start
            } else {
                beta_start + (beta_end - beta_start) * i as f64 / (t_max - 1) as f64
            }
        })
        .collect();
    let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
    let alpha_bars = alphas
        .iter()
        .scan(1.0, |acc, a| {
            *acc *= a;
            Some(*acc)
        })
        .collect();
    let sigmas = betas.iter().map(|b| b.sqrt()).collect();
    Ok(DiffusionSchedule {
        t_max,
        betas,
        alphas,
        alpha_bars,
        sigmas,
    })
}

impl DiffusionSchedule {
    pub fn t_max(&self) -> usize {
        self.t_max
    }

    /// Steps are 1-based throughout.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t - 1]
    }

    pub fn sigma(&self, t: usize) -> f64 {
        self.sigmas[t - 1]
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.t_max {
            return Err(Error::InvalidArgument(format!("step {t} outside 1..={}", self.t_max)));
        }
        Ok(())
    }
}

/// `z_t = √ᾱ_t·z0 + √(1 − ᾱ_t)·eps`.
pub fn q_sample(z0: ArrayView1<f64>, t: usize, eps: ArrayView1<f64>, sched: &DiffusionSchedule) -> Result<Array1<f64>> {
    sched.check_step(t)?;
    if z0.len() != eps.len() {
        return Err(Error::Shape("latent and noise lengths differ".into()));
    }
    let ab = sched.alpha_bar(t);
    Ok(&z0 * ab.sqrt() + &eps * (1.0 - ab).sqrt())
}
