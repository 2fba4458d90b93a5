//! Sinusoidal index embeddings and learned label tables.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

use super::init::embedding_normal;
use super::Parameters;
use crate::error::{Error, Result};

/// Sinusoidal embedding of `index`: entry `2i` is `sin(p / 10000^(2i/dim))`
/// and entry `2i+1` the matching cosine.
pub fn positional_embedding(index: usize, dim: usize) -> Result<Array1<f64>> {
    if dim % 2 == 1 {
        return Err(Error::InvalidArgument(format!("embedding dim {dim} is odd")));
    }
    let mut out = Array1::zeros(dim);
    fill_sinusoid(index as f64, out.as_slice_mut().expect("contiguous"));
    Ok(out)
}

/// Like [`positional_embedding`] but accepts odd `dim`, leaving the last
/// entry zero.
pub fn positional_embedding_padded(index: usize, dim: usize) -> Array1<f64> {
    let mut out = Array1::zeros(dim);
    let even = dim - dim % 2;
    fill_sinusoid(index as f64, &mut out.as_slice_mut().expect("contiguous")[..even]);
    out
}

/// Writes the sinusoidal embedding of a real position into `out` (even length).
pub fn fill_sinusoid(position: f64, out: &mut [f64]) {
    let dim = out.len() as f64;
    for (i, pair) in out.chunks_exact_mut(2).enumerate() {
        let freq = 10000f64.powf(-((2 * i) as f64) / dim);
        let (s, c) = (position * freq).sin_cos();
        pair[0] = s;
        pair[1] = c;
    }
}

/// `(n_labels + 1) × dim` lookup table; the last row is the null token.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelEmbedding {
    pub table: Array2<f64>,
}

impl LabelEmbedding {
    pub fn new<R: Rng + ?Sized>(n_labels: usize, dim: usize, rng: &mut R) -> Self {
        Self {
            table: embedding_normal(n_labels + 1, dim, rng),
        }
    }

    pub fn n_labels(&self) -> usize {
        self.table.nrows() - 1
    }

    pub fn dim(&self) -> usize {
        self.table.ncols()
    }

    /// Row index for `label`, with `None` mapping to the null row.
    pub fn index(&self, label: Option<usize>) -> Result<usize> {
        match label {
            Some(l) if l >= self.n_labels() => Err(Error::InvalidArgument(format!(
                "label {l} out of range for {} labels",
                self.n_labels()
            ))),
            Some(l) => Ok(l),
            None => Ok(self.n_labels()),
        }
    }

    pub fn lookup(&self, label: Option<usize>) -> Result<ArrayView1<'_, f64>> {
        Ok(self.table.row(self.index(label)?))
    }
}

impl Parameters for LabelEmbedding {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &'a [f64])) {
        self.table.visit(&format!("{prefix}table"), f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.table.visit_mut(f);
    }
}
