//! Fully connected layers, applied to row-batches.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::init::glorot_uniform;
use super::{Activation, Parameters};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out × in`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

/// Pre- and post-activation values of one batched forward pass.
#[derive(Debug, Clone)]
pub struct DenseOut {
    pub pre: Array2<f64>,
    pub out: Array2<f64>,
}

impl DenseLayer {
    pub fn new<R: Rng + ?Sized>(n_in: usize, n_out: usize, activation: Activation, rng: &mut R) -> Self {
        Self {
            weight: glorot_uniform(n_out, n_in, rng),
            bias: Array1::zeros(n_out),
            activation,
        }
    }

    pub fn n_in(&self) -> usize {
        self.weight.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.weight.nrows()
    }

    /// Rows of `x` are independent inputs.
    pub fn forward(&self, x: ArrayView2<f64>) -> DenseOut {
        assert_eq!(x.ncols(), self.n_in(), "dense input width");
        let mut pre = x.dot(&self.weight.t());
        pre += &self.bias;
        let act = self.activation;
        let out = pre.mapv(|v| act.apply(v));
        DenseOut { pre, out }
    }

    pub fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let act = self.activation;
        (self.weight.dot(&x) + &self.bias).mapv(|v| act.apply(v))
    }

    fn pre_grad(&self, fwd: &DenseOut, d_out: ArrayView2<f64>) -> Array2<f64> {
        let act = self.activation;
        let mut d_pre = d_out.to_owned();
        ndarray::Zip::from(&mut d_pre)
            .and(&fwd.pre)
            .and(&fwd.out)
            .for_each(|d, &p, &o| *d *= act.derivative(p, o));
        d_pre
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to the input batch.
    pub fn backward(
        &self,
        x: ArrayView2<f64>,
        fwd: &DenseOut,
        d_out: ArrayView2<f64>,
        grad: &mut DenseLayer,
    ) -> Array2<f64> {
        let d_pre = self.accumulate(x, fwd, d_out, grad);
        d_pre.dot(&self.weight)
    }

    /// Like [`DenseLayer::backward`] but skips the input gradient.
    pub fn backward_params(
        &self,
        x: ArrayView2<f64>,
        fwd: &DenseOut,
        d_out: ArrayView2<f64>,
        grad: &mut DenseLayer,
    ) {
        self.accumulate(x, fwd, d_out, grad);
    }

    fn accumulate(
        &self,
        x: ArrayView2<f64>,
        fwd: &DenseOut,
        d_out: ArrayView2<f64>,
        grad: &mut DenseLayer,
    ) -> Array2<f64> {
        let d_pre = self.pre_grad(fwd, d_out);
        ndarray::linalg::general_mat_mul(1.0, &d_pre.t(), &x, 1.0, &mut grad.weight);
        grad.bias += &d_pre.sum_axis(Axis(0));
        d_pre
    }
}

impl Parameters for DenseLayer {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &'a [f64])) {
        self.weight.visit(&format!("{prefix}weight"), f);
        self.bias.visit(&format!("{prefix}bias"), f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.weight.visit_mut(f);
        self.bias.visit_mut(f);
    }
}

/// A chain of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

impl Mlp {
    /// Layer widths `dims[0] → dims[1] → …`, one activation per layer.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], activations: &[Activation], rng: &mut R) -> Self {
        assert_eq!(dims.len(), activations.len() + 1, "one activation per layer");
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &a)| DenseLayer::new(w[0], w[1], a, rng))
            .collect();
        Self { layers }
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn n_out(&self) -> usize {
        self.layers.last().expect("nonempty mlp").n_out()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Vec<DenseOut> {
        let mut outs: Vec<DenseOut> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let fwd = match outs.last() {
                Some(prev) => layer.forward(prev.out.view()),
                None => layer.forward(x),
            };
            outs.push(fwd);
        }
        outs
    }

    /// Backpropagates `d_out` through the chain. The input gradient is only
    /// formed when `want_input_grad` is set.
    pub fn backward(
        &self,
        x: ArrayView2<f64>,
        outs: &[DenseOut],
        d_out: ArrayView2<f64>,
        grad: &mut Mlp,
        want_input_grad: bool,
    ) -> Option<Array2<f64>> {
        let mut d = d_out.to_owned();
        for l in (0..self.layers.len()).rev() {
            let input = if l == 0 { x } else { outs[l - 1].out.view() };
            if l == 0 && !want_input_grad {
                self.layers[0].backward_params(input, &outs[0], d.view(), &mut grad.layers[0]);
                return None;
            }
            d = self.layers[l].backward(input, &outs[l], d.view(), &mut grad.layers[l]);
        }
        Some(d)
    }
}

impl Parameters for Mlp {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &'a [f64])) {
        self.layers.visit(prefix, f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.layers.visit_mut(f);
    }
}

/// Applies `layers` in order to a single vector.
pub fn mlp_apply(layers: &[DenseLayer], x: ArrayView1<f64>) -> Result<Array1<f64>> {
    let mut h = x.to_owned();
    for (l, layer) in layers.iter().enumerate() {
        if layer.n_in() != h.len() {
            return Err(Error::Shape(format!(
                "layer {l} expects {} inputs, got {}",
                layer.n_in(),
                h.len()
            )));
        }
        if layer.bias.len() != layer.n_out() {
            return Err(Error::Shape(format!("layer {l}: bias length mismatch")));
        }
        h = layer.apply(h.view());
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{flatten, grad_check, unflatten, zeros_like};
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_relu() {
        let layer = DenseLayer {
            weight: Array2::eye(2),
            bias: Array1::zeros(2),
            activation: Activation::Relu,
        };
        let y = mlp_apply(&[layer], array![1.0, -1.0].view()).unwrap();
        assert_eq!(y, array![1.0, 0.0]);
    }

    #[test]
    fn zero_weights_pass_bias() {
        let layer = DenseLayer {
            weight: Array2::zeros((3, 2)),
            bias: array![-1.0, 0.5, 2.0],
            activation: Activation::Relu,
        };
        let y = mlp_apply(&[layer], array![4.0, 5.0].view()).unwrap();
        assert_eq!(y, array![0.0, 0.5, 2.0]);
    }

    #[test]
    fn two_layer_by_hand() {
        let l1 = DenseLayer {
            weight: array![[1.0, 0.0, -1.0], [0.5, 2.0, 0.0]],
            bias: array![0.0, -1.0],
            activation: Activation::Relu,
        };
        let l2 = DenseLayer {
            weight: array![[2.0, -1.0]],
            bias: array![0.25],
            activation: Activation::Identity,
        };
        let x = array![1.0, 2.0, 3.0];
        // h = relu([1 - 3, 0.5 + 4 - 1]) = [0, 3.5]; y = 0 - 3.5 + 0.25
        let y = mlp_apply(&[l1, l2], x.view()).unwrap();
        assert_eq!(y, array![-3.25]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = DenseLayer::new(3, 2, Activation::Relu, &mut rng);
        assert!(mlp_apply(&[layer], array![1.0, 2.0].view()).is_err());
    }

    #[test]
    fn batched_forward_matches_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mlp = Mlp::new(&[4, 5, 2], &[Activation::Elu, Activation::Sigmoid], &mut rng);
        let x = Array2::from_shape_fn((3, 4), |(i, j)| (i as f64) - 0.3 * j as f64);
        let outs = mlp.forward(x.view());
        for r in 0..3 {
            let single = mlp_apply(&mlp.layers, x.row(r)).unwrap();
            for (a, b) in outs[1].out.row(r).iter().zip(single.iter()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn mlp_gradient_matches_differences() {
        let acts = [Activation::Relu, Activation::LeakyRelu, Activation::Sigmoid];
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mlp = Mlp::new(&[3, 6, 5, 2], &acts, &mut rng);
            let x = Array2::from_shape_fn((4, 3), |_| rng.random_range(-1.0..1.0));
            let target = Array2::from_shape_fn((4, 2), |_| rng.random_range(0.0..1.0));
            let loss = |m: &Mlp| {
                let outs = m.forward(x.view());
                (&outs[2].out - &target).mapv(|v| v * v).sum()
            };
            let mut probe = mlp.clone();
            let check = grad_check(
                |w| {
                    unflatten(&mut probe, w);
                    let outs = probe.forward(x.view());
                    let d = (&outs[2].out - &target) * 2.0;
                    let mut g = zeros_like(&probe);
                    probe.backward(x.view(), &outs, d.view(), &mut g, false);
                    (loss(&probe), flatten(&g))
                },
                &flatten(&mlp),
                1e-6,
            );
            assert!(check.max_rel_error < 1e-5, "seed {seed}: {check:?}");
        }
    }
}
