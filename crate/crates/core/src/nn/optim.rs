//! Adam / AdamW and exponential moving averages.

use serde::{Deserialize, Serialize};

use super::{tensors, zip_mut, Parameters};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// AdamW when set: decay is applied to the weights directly instead of
    /// being added to the gradient.
    pub decoupled: bool,
}

impl AdamConfig {
    pub fn adam(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            decoupled: false,
        }
    }

    pub fn adamw(lr: f64, weight_decay: f64) -> Self {
        Self {
            decoupled: true,
            ..Self::adam(lr, weight_decay)
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimState {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl OptimState {
    pub fn new<P: Parameters + ?Sized>(config: AdamConfig, params: &P) -> Self {
        let shapes: Vec<usize> = tensors(params).iter().map(|t| t.len()).collect();
        Self {
            config,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// One update of `params` from `grads`, which must share their layout.
    pub fn step<P: Parameters + ?Sized>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let g = tensors(grads);
        if g.len() != self.m.len() || g.iter().zip(&self.m).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::Shape("gradient layout does not match optimizer state".into()));
        }
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powf(self.step as f64);
        let bc2 = 1.0 - c.beta2.powf(self.step as f64);
        let mut idx = 0;
        let (ms, vs) = (&mut self.m, &mut self.v);
        let mut mismatch = false;
        params.visit_mut(&mut |p| {
            let (Some(m), Some(v), Some(g)) = (ms.get_mut(idx), vs.get_mut(idx), g.get(idx)) else {
                mismatch = true;
                return;
            };
            if p.len() != m.len() {
                mismatch = true;
                return;
            }
            for k in 0..p.len() {
                let mut grad = g[k];
                if c.decoupled {
                    p[k] *= 1.0 - c.lr * c.weight_decay;
                } else {
                    grad += c.weight_decay * p[k];
                }
                m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * grad;
                v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * grad * grad;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
            }
            idx += 1;
        });
        if mismatch || idx != self.m.len() {
            return Err(Error::Shape("parameter layout does not match optimizer state".into()));
        }
        Ok(())
    }
}

/// `ema ← decay·ema + (1 − decay)·params`, tensor by tensor.
pub fn ema_update<P: Parameters + ?Sized>(ema: &mut P, params: &P, decay: f64) {
    zip_mut(ema, params, |e, p| {
        for (e, &p) in e.iter_mut().zip(p) {
            *e = decay * *e + (1.0 - decay) * p;
        }
    });
}
