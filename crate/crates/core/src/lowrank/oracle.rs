//! Gradient descent on a linear squared-loss classifier over fixed features,
//! run step by step and through its closed form on the labeled rows.

use ndarray::{Array2, ArrayView2};

use super::spectrum::gram_matrix;
use crate::error::{Error, Result};
use crate::graph::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct GdResiduals {
    /// `[H W_t − Y]` on the labeled rows after `t` explicit steps.
    pub iterative: Array2<f64>,
    /// `−(I − η K_LL)^t Y_L`.
    pub closed_form: Array2<f64>,
}

impl GdResiduals {
    pub fn gap(&self) -> f64 {
        (&self.iterative - &self.closed_form).mapv(|v| v * v).sum().sqrt()
    }
}

/// Runs `t` steps of `W ← W − η H_Lᵀ (H_L W − Y_L)` from `W = 0` and
/// evaluates the closed-form labeled residual. `η` must lie in
/// `(0, 1/λ₁)` with `λ₁` the top eigenvalue of `H Hᵀ`.
pub fn linear_gd_oracle(
    h: ArrayView2<f64>,
    y: ArrayView2<f64>,
    labeled: &[NodeId],
    eta: f64,
    t: usize,
) -> Result<GdResiduals> {
    if y.nrows() != h.nrows() {
        return Err(Error::Shape(format!("{} label rows for {} feature rows", y.nrows(), h.nrows())));
    }
    if let Some(&i) = labeled.iter().find(|&&i| i >= h.nrows()) {
        return Err(Error::InvalidArgument(format!("labeled node {i} out of range")));
    }
    let top = gram_matrix(h).eigenvalues.first().copied().unwrap_or(0.0);
    if !(eta > 0.0 && eta * top < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "step size {eta} outside (0, 1/{top})"
        )));
    }
    let h_l = h.select(ndarray::Axis(0), labeled);
    let y_l = y.select(ndarray::Axis(0), labeled);

    let mut w = Array2::zeros((h.ncols(), y.ncols()));
    for _ in 0..t {
        let r = h_l.dot(&w) - &y_l;
        w.scaled_add(-eta, &h_l.t().dot(&r));
    }
    let iterative = h_l.dot(&w) - &y_l;

    let m = labeled.len();
    let step = Array2::<f64>::eye(m) - h_l.dot(&h_l.t()) * eta;
    let mut closed_form = -y_l;
    for _ in 0..t {
        closed_form = step.dot(&closed_form);
    }
    Ok(GdResiduals {
        iterative,
        closed_form,
    })
}
