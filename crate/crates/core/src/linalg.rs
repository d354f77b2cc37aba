//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Spectral norm by power iteration on `MᵀM`.
///
/// Stops when the relative change of the estimate drops below `tol` or after
/// `max_iter` steps. Starts from a fixed non-degenerate vector, so the result
/// is deterministic.
pub fn spectral_norm(m: &DMatrix<f64>, tol: f64, max_iter: usize) -> f64 {
    power_iteration(m, tol, max_iter, f64::INFINITY)
}

/// Whether `spectral_norm(m, tol, max_iter) <= bound`, without iterating
/// when the answer is already known: the Frobenius norm bounds the spectral
/// norm from above, and the power-iteration estimates never decrease.
pub fn spectral_norm_within(m: &DMatrix<f64>, bound: f64, tol: f64, max_iter: usize) -> bool {
    m.norm() <= bound || power_iteration(m, tol, max_iter, bound) <= bound
}

/// Power iteration that also returns as soon as an estimate exceeds `stop_above`.
fn power_iteration(m: &DMatrix<f64>, tol: f64, max_iter: usize, stop_above: f64) -> f64 {
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.618_033_988_75).fract());
    v /= v.norm();
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        let mv = m * &v;
        let next_estimate = mv.norm();
        if next_estimate == 0.0 {
            return 0.0;
        }
        if next_estimate > stop_above {
            return next_estimate;
        }
        let mut w = m.tr_mul(&mv);
        let wn = w.norm();
        if wn == 0.0 {
            return next_estimate;
        }
        w /= wn;
        v = w;
        if (next_estimate - estimate).abs() <= tol * next_estimate {
            return next_estimate;
        }
        estimate = next_estimate;
    }
    estimate
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.nrows() == m.ncols() && (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

/// `P M Pᵀ` where node `i` moves to `perm[i]`.
pub fn permute_sym(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[(perm[i], perm[j])] = m[(i, j)];
        }
    }
    out
}
