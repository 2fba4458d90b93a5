//! Central finite-difference checks of hand-written gradients.

/// Outcome of a gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Coordinate with the largest relative error.
    pub worst_index: usize,
    pub n_checked: usize,
}

/// Entries smaller than this are compared absolutely rather than relatively.
const REL_FLOOR: f64 = 1e-6;

/// Compares the analytic gradient returned by `f` at `x` with central
/// differences of step `eps` on every coordinate.
///
/// `f` returns `(value, gradient)`; only the value is used at perturbed points.
pub fn grad_check<F>(f: F, x: &[f64], eps: f64) -> GradCheck
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let all: Vec<usize> = (0..x.len()).collect();
    grad_check_at(f, x, eps, &all)
}

/// [`grad_check`] restricted to the listed coordinates.
pub fn grad_check_at<F>(mut f: F, x: &[f64], eps: f64, indices: &[usize]) -> GradCheck
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(x);
    assert_eq!(analytic.len(), x.len(), "gradient length");
    let mut probe = x.to_vec();
    let mut out = GradCheck {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst_index: 0,
        n_checked: indices.len(),
    };
    for &i in indices {
        probe[i] = x[i] + eps;
        let plus = f(&probe).0;
        probe[i] = x[i] - eps;
        let minus = f(&probe).0;
        probe[i] = x[i];
        let numeric = (plus - minus) / (2.0 * eps);
        let abs = (analytic[i] - numeric).abs();
        let rel = abs / analytic[i].abs().max(numeric.abs()).max(REL_FLOOR);
        if rel > out.max_rel_error || rel.is_nan() {
            out.max_rel_error = rel;
            out.worst_index = i;
        }
        out.max_abs_error = out.max_abs_error.max(abs);
    }
    out
}
