//! Spectrum of the Gram matrix `K = H Hᵀ`, the truncated nuclear norm and
//! label eigen-projections.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Relative cutoff below which an eigenvalue counts as zero.
const ZERO_TOL: f64 = 1e-12;

/// Nonzero part of the spectrum of `H Hᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSpectrum {
    /// `min(N̄, d)` eigenvalues, descending, clamped at zero.
    pub eigenvalues: Array1<f64>,
    /// Orthonormal eigenvectors of `H Hᵀ` for the nonzero eigenvalues,
    /// one per column, `N̄ × rank`.
    pub eigenvectors: Array2<f64>,
}

impl GramSpectrum {
    pub fn rank(&self) -> usize {
        self.eigenvectors.ncols()
    }

    /// `min(N̄, d)`.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

fn to_na(x: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[[i, j]])
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending.
fn sym_eigen(g: Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = g.nrows();
    let eig = to_na(g.view()).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigenvalues of the smaller Gram matrix together with eigenvectors on the
/// right (`d × min`, when `d ≤ N̄`) or on the left (`N̄ × min`).
enum Side {
    Right(Array2<f64>),
    Left(Array2<f64>),
}

fn small_eigen(h: ArrayView2<f64>) -> (Vec<f64>, Side) {
    if h.ncols() <= h.nrows() {
        let (l, v) = sym_eigen(h.t().dot(&h));
        (l, Side::Right(v))
    } else {
        let (l, u) = sym_eigen(h.dot(&h.t()));
        (l, Side::Left(u))
    }
}

/// Spectrum of `H Hᵀ` through the smaller of `HᵀH` and `H Hᵀ`. Left
/// eigenvectors are lifted as `U = H V Λ^{-1/2}`.
pub fn gram_matrix(h: ArrayView2<f64>) -> GramSpectrum {
    let (values, side) = small_eigen(h);
    let top = values.first().copied().unwrap_or(0.0);
    let rank = values.iter().take_while(|&&l| l > ZERO_TOL * top.max(f64::MIN_POSITIVE)).count();
    let eigenvectors = match side {
        Side::Left(u) => u.slice(ndarray::s![.., ..rank]).to_owned(),
        Side::Right(v) => {
            let mut u = h.dot(&v.slice(ndarray::s![.., ..rank]));
            for (mut col, &l) in u.axis_iter_mut(Axis(1)).zip(&values) {
                col /= l.sqrt();
            }
            u
        }
    };
    GramSpectrum {
        eigenvalues: Array1::from(values),
        eigenvectors,
    }
}

/// Sum of the eigenvalues of `H Hᵀ` past the first `r0`, and its gradient
/// `2 P H` with `P` the projector onto the trailing eigenvectors.
pub fn truncated_nuclear_norm(h: ArrayView2<f64>, r0: usize) -> Result<(f64, Array2<f64>)> {
    let full = h.nrows().min(h.ncols());
    if r0 >= full {
        return Err(Error::InvalidArgument(format!(
            "kept rank {r0} must be below min(rows, cols) = {full}"
        )));
    }
    let (values, side) = small_eigen(h);
    let value = values[r0..].iter().sum();
    let grad = match side {
        Side::Right(v) => {
            let tail = v.slice(ndarray::s![.., r0..]);
            h.dot(&tail).dot(&tail.t()) * 2.0
        }
        Side::Left(u) => {
            let tail = u.slice(ndarray::s![.., r0..]);
            tail.dot(&tail.t().dot(&h)) * 2.0
        }
    };
    Ok((value, grad))
}

/// `⌈γ · min(N̄, d)⌉`, kept below `min(N̄, d)`.
pub fn kept_rank(gamma: f64, n_rows: usize, n_cols: usize) -> usize {
    let full = n_rows.min(n_cols);
    ((gamma * full as f64).ceil() as usize).min(full.saturating_sub(1))
}

/// Per-class projections onto the eigenvectors and the concentration curve.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenProjection {
    /// `min(N̄, d)` entries: the class-averaged projection on each
    /// eigenvector (zero past the rank).
    pub projection: Array1<f64>,
    /// Entry `r − 1` is the class average of the norm of the first `r`
    /// normalized projections.
    pub concentration: Array1<f64>,
}

/// Projects each label column onto the eigenvectors. Each column is
/// normalized by the norm of its component inside the span of the
/// eigenvectors, so the curve ends at one.
pub fn eigen_projection(spectrum: &GramSpectrum, y: ArrayView2<f64>) -> Result<EigenProjection> {
    let u = &spectrum.eigenvectors;
    if y.nrows() != u.nrows() {
        return Err(Error::Shape(format!(
            "labels have {} rows, eigenvectors {}",
            y.nrows(),
            u.nrows()
        )));
    }
    let n_classes = y.ncols();
    if n_classes == 0 {
        return Err(Error::InvalidArgument("no label columns".into()));
    }
    let len = spectrum.len();
    let mut projection = Array1::zeros(len);
    let mut concentration = Array1::zeros(len);
    for (c, col) in y.axis_iter(Axis(1)).enumerate() {
        let p = class_projection(u.view(), col).ok_or_else(|| {
            Error::InvalidArgument(format!("class {c} has no mass in the feature span"))
        })?;
        let mut acc = 0.0;
        for r in 0..len {
            let v = p.get(r).copied().unwrap_or(0.0);
            projection[r] += v / n_classes as f64;
            acc += v * v;
            concentration[r] += acc.sqrt() / n_classes as f64;
        }
    }
    Ok(EigenProjection {
        projection,
        concentration,
    })
}

fn class_projection(u: ArrayView2<f64>, y: ArrayView1<f64>) -> Option<Array1<f64>> {
    let p = u.t().dot(&y);
    let norm = p.dot(&p).sqrt();
    let scale = y.dot(&y).sqrt();
    (norm > 1e-12 * scale.max(f64::MIN_POSITIVE) && norm > 0.0).then(|| p / norm)
}
