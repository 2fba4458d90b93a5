//! Small dense building blocks with hand-written adjoints.
//!
//! Every trainable model implements [`Parameters`], which exposes its tensors
//! in a fixed order. Gradients are stored in a value of the same type, so the
//! optimizer, EMA and checkpoint code only ever walk two parallel visits.

pub mod activation;
pub mod attention;
pub mod checkpoint;
pub mod dense;
pub mod embedding;
pub mod gradcheck;
pub mod init;
pub mod optim;

pub use activation::{sigmoid, softmax, Activation};
pub use attention::{attention_aggregate, AttentionLayer};
pub use dense::{mlp_apply, DenseLayer, Mlp};
pub use embedding::{positional_embedding, LabelEmbedding};
pub use gradcheck::{grad_check, GradCheck};
pub use optim::{ema_update, AdamConfig, OptimState};

use ndarray::{Array1, Array2};

/// A fixed, ordered collection of named `f64` tensors.
pub trait Parameters {
    /// Visits `(name, shape, data)` for every tensor, always in the same order.
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &'a [f64]));

    /// Mutable visit in the same order as [`Parameters::visit`].
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64]));
}

impl Parameters for Array2<f64> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &'a [f64])) {
        f(prefix, self.shape(), self.as_slice().expect("standard layout"));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        f(self.as_slice_mut().expect("standard layout"));
    }
}

impl Parameters for Array1<f64> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &'a [f64])) {
        f(prefix, self.shape(), self.as_slice().expect("standard layout"));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        f(self.as_slice_mut().expect("standard layout"));
    }
}

impl<P: Parameters> Parameters for Vec<P> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &'a [f64])) {
        for (i, p) in self.iter().enumerate() {
            p.visit(&format!("{prefix}{i}."), f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for p in self {
            p.visit_mut(f);
        }
    }
}

/// Tensor slices of `p` in visit order.
pub fn tensors<P: Parameters + ?Sized>(p: &P) -> Vec<&[f64]> {
    let mut out = Vec::new();
    p.visit("", &mut |_, _, s| out.push(s));
    out
}

pub fn param_count<P: Parameters + ?Sized>(p: &P) -> usize {
    tensors(p).iter().map(|s| s.len()).sum()
}

/// All parameters concatenated in visit order.
pub fn flatten<P: Parameters + ?Sized>(p: &P) -> Vec<f64> {
    tensors(p).concat()
}

/// Overwrites `p` from a flat vector produced by [`flatten`].
pub fn unflatten<P: Parameters + ?Sized>(p: &mut P, flat: &[f64]) {
    let mut offset = 0;
    p.visit_mut(&mut |s| {
        s.copy_from_slice(&flat[offset..offset + s.len()]);
        offset += s.len();
    });
    assert_eq!(offset, flat.len(), "flat parameter length mismatch");
}

/// Applies `f` to matching tensor pairs of `target` and `other`.
pub fn zip_mut<P: Parameters + ?Sized>(target: &mut P, other: &P, mut f: impl FnMut(&mut [f64], &[f64])) {
    let src = tensors(other);
    let mut idx = 0;
    target.visit_mut(&mut |t| {
        let s = src[idx];
        assert_eq!(t.len(), s.len(), "parameter shape mismatch");
        f(t, s);
        idx += 1;
    });
    assert_eq!(idx, src.len(), "parameter count mismatch");
}

/// Same structure as `p`, every entry zero.
pub fn zeros_like<P: Parameters + Clone>(p: &P) -> P {
    let mut z = p.clone();
    z.visit_mut(&mut |s| s.fill(0.0));
    z
}

/// Sum of squared entries across all tensors.
pub fn squared_norm<P: Parameters + ?Sized>(p: &P) -> f64 {
    tensors(p).iter().flat_map(|s| s.iter()).map(|v| v * v).sum()
}
