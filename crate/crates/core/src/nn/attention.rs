//! Single-head graph attention over a center node and its neighbor set.
//!
//! With transformed vectors `t = W·x`, each neighbor gets a score
//! `leaky_relu(a_left·t_center + a_right·t_j)`, the scores are softmaxed, and
//! the output is `elu(Σ α_j t_j)`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use rand::Rng;

use super::activation::softmax;
use super::init::{glorot_uniform, glorot_uniform_vec};
use super::{Activation, Parameters};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionLayer {
    /// `out × in`.
    pub weight: Array2<f64>,
    /// Scoring vector `[a_left ∥ a_right]` of length `2·out`.
    pub attn: Array1<f64>,
}

/// Intermediate values of one aggregation, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Attended {
    /// Scores before the leaky ReLU.
    pub raw: Vec<f64>,
    pub alpha: Vec<f64>,
    /// `Σ α_j t_j` before the ELU.
    pub pre: Array1<f64>,
    pub out: Array1<f64>,
}

impl AttentionLayer {
    pub fn new<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        Self {
            weight: glorot_uniform(n_out, n_in, rng),
            attn: glorot_uniform_vec(2 * n_out, 2 * n_out, 1, rng),
        }
    }

    pub fn n_in(&self) -> usize {
        self.weight.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.weight.nrows()
    }

    fn split_attn(&self) -> (ArrayView1<'_, f64>, ArrayView1<'_, f64>) {
        let h = self.n_out();
        (self.attn.slice(s![..h]), self.attn.slice(s![h..]))
    }

    /// Aggregates already transformed vectors (`t_neighbors` one per row).
    pub fn attend(&self, t_center: ArrayView1<f64>, t_neighbors: ArrayView2<f64>) -> Attended {
        let (a_left, a_right) = self.split_attn();
        let base = a_left.dot(&t_center);
        let raw: Vec<f64> = t_neighbors.rows().into_iter().map(|t| base + a_right.dot(&t)).collect();
        let scores: Vec<f64> = raw.iter().map(|&r| Activation::LeakyRelu.apply(r)).collect();
        let alpha = softmax(&scores);
        let mut pre = Array1::zeros(self.n_out());
        for (t, &a) in t_neighbors.rows().into_iter().zip(&alpha) {
            pre.scaled_add(a, &t);
        }
        let out = pre.mapv(|v| Activation::Elu.apply(v));
        Attended { raw, alpha, pre, out }
    }

    /// Adjoint of [`AttentionLayer::attend`]. Adds into `grad.attn`,
    /// `d_center` and `d_neighbors`.
    pub fn attend_backward(
        &self,
        t_center: ArrayView1<f64>,
        t_neighbors: ArrayView2<f64>,
        att: &Attended,
        d_out: ArrayView1<f64>,
        grad: &mut AttentionLayer,
        mut d_center: ArrayViewMut1<f64>,
        mut d_neighbors: ArrayViewMut2<f64>,
    ) {
        let h = self.n_out();
        let (a_left, a_right) = self.split_attn();
        let mut d_pre = d_out.to_owned();
        ndarray::Zip::from(&mut d_pre)
            .and(&att.pre)
            .and(&att.out)
            .for_each(|d, &p, &o| *d *= Activation::Elu.derivative(p, o));

        let d_alpha: Vec<f64> = t_neighbors.rows().into_iter().map(|t| d_pre.dot(&t)).collect();
        let mean: f64 = att.alpha.iter().zip(&d_alpha).map(|(a, d)| a * d).sum();
        let mut d_raw_sum = 0.0;
        for (j, t) in t_neighbors.rows().into_iter().enumerate() {
            let d_score = att.alpha[j] * (d_alpha[j] - mean);
            let scored = Activation::LeakyRelu.apply(att.raw[j]);
            let d_raw = d_score * Activation::LeakyRelu.derivative(att.raw[j], scored);
            d_raw_sum += d_raw;
            grad.attn.slice_mut(s![h..]).scaled_add(d_raw, &t);
            let mut dn = d_neighbors.row_mut(j);
            dn.scaled_add(att.alpha[j], &d_pre);
            dn.scaled_add(d_raw, &a_right);
        }
        grad.attn.slice_mut(s![..h]).scaled_add(d_raw_sum, &t_center);
        d_center.scaled_add(d_raw_sum, &a_left);
    }

    /// Transforms raw inputs and aggregates.
    pub fn forward(&self, center: ArrayView1<f64>, neighbors: ArrayView2<f64>) -> (Array1<f64>, Array2<f64>, Attended) {
        let t_center = self.weight.dot(&center);
        let t_neighbors = neighbors.dot(&self.weight.t());
        let att = self.attend(t_center.view(), t_neighbors.view());
        (t_center, t_neighbors, att)
    }

    /// Adjoint of [`AttentionLayer::forward`]; returns input gradients for
    /// the center and each neighbor row.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        center: ArrayView1<f64>,
        neighbors: ArrayView2<f64>,
        t_center: ArrayView1<f64>,
        t_neighbors: ArrayView2<f64>,
        att: &Attended,
        d_out: ArrayView1<f64>,
        grad: &mut AttentionLayer,
    ) -> (Array1<f64>, Array2<f64>) {
        let mut dt_center = Array1::zeros(self.n_out());
        let mut dt_neighbors = Array2::zeros(t_neighbors.raw_dim());
        self.attend_backward(
            t_center,
            t_neighbors,
            att,
            d_out,
            grad,
            dt_center.view_mut(),
            dt_neighbors.view_mut(),
        );
        let dt_col = dt_center.view().insert_axis(ndarray::Axis(1));
        let c_row = center.insert_axis(ndarray::Axis(0));
        ndarray::linalg::general_mat_mul(1.0, &dt_col, &c_row, 1.0, &mut grad.weight);
        ndarray::linalg::general_mat_mul(1.0, &dt_neighbors.t(), &neighbors, 1.0, &mut grad.weight);
        (self.weight.t().dot(&dt_center), dt_neighbors.dot(&self.weight))
    }
}

impl Parameters for AttentionLayer {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &'a [f64])) {
        self.weight.visit(&format!("{prefix}weight"), f);
        self.attn.visit(&format!("{prefix}attn"), f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.weight.visit_mut(f);
        self.attn.visit_mut(f);
    }
}

/// Attention-weighted aggregation of `neighbors` around `center`.
pub fn attention_aggregate(
    layer: &AttentionLayer,
    center: ArrayView1<f64>,
    neighbors: &[ArrayView1<f64>],
) -> Result<Array1<f64>> {
    if neighbors.is_empty() {
        return Err(Error::InvalidArgument("empty neighbor list".into()));
    }
    let width = layer.n_in();
    if center.len() != width || neighbors.iter().any(|n| n.len() != width) {
        return Err(Error::Shape(format!("attention expects inputs of width {width}")));
    }
    if layer.attn.len() != 2 * layer.n_out() {
        return Err(Error::Shape("scoring vector must have length 2·out".into()));
    }
    let mut stacked = Array2::zeros((neighbors.len(), width));
    for (mut row, n) in stacked.rows_mut().into_iter().zip(neighbors) {
        row.assign(n);
    }
    Ok(layer.forward(center, stacked.view()).2.out)
}
