//! Noise-prediction network: an MLP over `[z_t ∥ label embedding ∥ time
//! embedding]`, with a null label row for unconditional prediction.

use ndarray::{s, Array2, ArrayView2};
use rand::Rng;

use crate::nn::dense::DenseOut;
use crate::nn::embedding::fill_sinusoid;
use crate::nn::{Activation, LabelEmbedding, Mlp, Parameters};

/// Anything that predicts the injected noise for a batch of noisy latents.
pub trait NoisePredictor {
    /// One prediction row per input row; `None` labels are unconditional.
    fn predict(&self, z_t: ArrayView2<f64>, steps: &[usize], labels: &[Option<usize>]) -> Array2<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Denoiser {
    pub mlp: Mlp,
    pub labels: LabelEmbedding,
    time_dim: usize,
}

/// Forward values needed for the backward pass.
#[derive(Debug, Clone)]
pub struct DenoiserForward {
    input: Array2<f64>,
    outs: Vec<DenseOut>,
    label_rows: Vec<usize>,
}

impl DenoiserForward {
    pub fn prediction(&self) -> &Array2<f64> {
        &self.outs.last().expect("nonempty").out
    }

    /// Per-layer pre-activations and outputs.
    pub fn layers(&self) -> &[DenseOut] {
        &self.outs
    }
}

impl Denoiser {
    pub fn new<R: Rng + ?Sized>(
        latent_dim: usize,
        n_classes: usize,
        hidden: usize,
        label_dim: usize,
        time_dim: usize,
        rng: &mut R,
    ) -> Self {
        assert!(time_dim.is_multiple_of(2), "time embedding dim must be even");
        let mlp = Mlp::new(
            &[latent_dim + label_dim + time_dim, hidden, hidden, latent_dim],
            &[Activation::Relu, Activation::Relu, Activation::Identity],
            rng,
        );
        Self {
            mlp,
            labels: LabelEmbedding::new(n_classes, label_dim, rng),
            time_dim,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.mlp.n_out()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.n_labels()
    }

    pub fn time_dim(&self) -> usize {
        self.time_dim
    }

    pub fn forward(&self, z_t: ArrayView2<f64>, steps: &[usize], labels: &[Option<usize>]) -> DenoiserForward {
        let (n, d) = z_t.dim();
        assert_eq!(d, self.latent_dim(), "latent width");
        assert!(steps.len() == n && labels.len() == n, "one step and label per row");
        let ld = self.labels.dim();
        let mut input = Array2::zeros((n, d + ld + self.time_dim));
        input.slice_mut(s![.., ..d]).assign(&z_t);
        let mut label_rows = Vec::with_capacity(n);
        for r in 0..n {
            let row = self.labels.index(labels[r]).expect("label within range");
            label_rows.push(row);
            input
                .slice_mut(s![r, d..d + ld])
                .assign(&self.labels.table.row(row));
            let mut time = input.slice_mut(s![r, d + ld..]);
            fill_sinusoid(steps[r] as f64, time.as_slice_mut().expect("contiguous row"));
        }
        let outs = self.mlp.forward(input.view());
        DenoiserForward {
            input,
            outs,
            label_rows,
        }
    }

    /// Adds parameter gradients for an output gradient `d_pred`.
    pub fn backward(&self, fwd: &DenoiserForward, d_pred: ArrayView2<f64>, grad: &mut Denoiser) {
        let d_in = self
            .mlp
            .backward(fwd.input.view(), &fwd.outs, d_pred, &mut grad.mlp, true)
            .expect("input gradient requested");
        let d = self.latent_dim();
        let ld = self.labels.dim();
        for (r, &row) in fwd.label_rows.iter().enumerate() {
            grad.labels
                .table
                .row_mut(row)
                .scaled_add(1.0, &d_in.slice(s![r, d..d + ld]));
        }
    }
}

impl NoisePredictor for Denoiser {
    fn predict(&self, z_t: ArrayView2<f64>, steps: &[usize], labels: &[Option<usize>]) -> Array2<f64> {
        let mut fwd = self.forward(z_t, steps, labels);
        fwd.outs.pop().expect("nonempty").out
    }
}

impl Parameters for Denoiser {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &'a [f64])) {
        self.mlp.visit(&format!("{prefix}mlp."), f);
        self.labels.visit(&format!("{prefix}labels."), f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.mlp.visit_mut(f);
        self.labels.visit_mut(f);
    }
}
