//! Parameter initializers.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Glorot-uniform `out × in` matrix: U(−a, a) with a = √(6 / (in + out)).
pub fn glorot_uniform<R: Rng + ?Sized>(n_out: usize, n_in: usize, rng: &mut R) -> Array2<f64> {
    let a = (6.0 / (n_in + n_out).max(1) as f64).sqrt();
    Array2::from_shape_simple_fn((n_out, n_in), || rng.random_range(-a..a))
}

pub fn glorot_uniform_vec<R: Rng + ?Sized>(len: usize, fan_in: usize, fan_out: usize, rng: &mut R) -> Array1<f64> {
    let a = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
    Array1::from_shape_simple_fn(len, || rng.random_range(-a..a))
}

/// Embedding table with N(0, 0.02) entries.
pub fn embedding_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let normal = Normal::new(0.0, 0.02).expect("valid normal");
    Array2::from_shape_simple_fn((rows, cols), || normal.sample(rng))
}
