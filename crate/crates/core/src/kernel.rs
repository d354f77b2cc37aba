//! One-sided discrete boundary kernels, temporal smoothing of similarity
//! matrices, and Lepski bandwidth selection.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{CascError, Result};
use crate::linalg::{max_abs, spectral_norm_within};

/// Power-iteration settings for the spectral norms inside Lepski's rule.
pub const LEPSKI_NORM_TOL: f64 = 1e-8;
pub const LEPSKI_NORM_MAX_ITER: usize = 1000;

/// Discrete kernel on the past window `{-r, ..., 0}`.
///
/// The weights solve the moment system
/// `(1/(r+1)) Σ_i i^k W(i) = [k == 0]` for `k < ell` with minimum Euclidean
/// norm. The solve is carried out in exact rational arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    r: usize,
    ell: usize,
    /// `weights[j]` is `W(j - r)`, i.e. oldest period first.
    weights: Vec<f64>,
    exact: Vec<BigRational>,
    w_max: f64,
}

impl KernelSpec {
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    /// Weights ordered from offset `-r` up to `0`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at offset `i` in `-r..=0`.
    pub fn weight(&self, offset: i64) -> f64 {
        let idx = offset + self.r as i64;
        assert!(offset <= 0 && idx >= 0, "offset {offset} outside the kernel support");
        self.weights[idx as usize]
    }

    /// Exact rational weights, oldest first.
    pub fn exact_weights(&self) -> &[BigRational] {
        &self.exact
    }

    pub fn w_max(&self) -> f64 {
        self.w_max
    }

    /// `(1/|F_r|) Σ_i i^k W(i)`, evaluated in floating point.
    pub fn moment(&self, k: u32) -> f64 {
        let support = (self.r + 1) as f64;
        self.weights
            .iter()
            .enumerate()
            .map(|(j, w)| (j as f64 - self.r as f64).powi(k as i32) * w)
            .sum::<f64>()
            / support
    }
}

/// Builds the minimum-norm order-`ell` kernel with bandwidth `r`.
pub fn build_kernel(r: usize, ell: usize) -> Result<KernelSpec> {
    if ell == 0 || ell > r + 1 {
        return Err(CascError::InfeasibleKernel { r, ell });
    }
    let offsets: Vec<BigInt> = (0..=r).map(|j| BigInt::from(j as i64 - r as i64)).collect();
    // Vandermonde rows: v[k][j] = offset_j^k
    let vander: Vec<Vec<BigRational>> = (0..ell)
        .map(|k| {
            offsets
                .iter()
                .map(|o| BigRational::from_integer(num_traits::pow(o.clone(), k)))
                .collect()
        })
        .collect();
    // Gram system (V Vᵀ) y = (r+1) e_0, then W = Vᵀ y.
    let mut gram = vec![vec![BigRational::zero(); ell + 1]; ell];
    for a in 0..ell {
        for b in 0..ell {
            gram[a][b] = vander[a]
                .iter()
                .zip(&vander[b])
                .fold(BigRational::zero(), |acc, (x, y)| acc + x * y);
        }
    }
    gram[0][ell] = BigRational::from_integer(BigInt::from(r as i64 + 1));
    let y = solve_rational(gram);
    let exact: Vec<BigRational> = (0..=r)
        .map(|j| (0..ell).fold(BigRational::zero(), |acc, k| acc + &vander[k][j] * &y[k]))
        .collect();
    let weights: Vec<f64> = exact.iter().map(|q| q.to_f64().unwrap_or(f64::NAN)).collect();
    let w_max = weights.iter().fold(0.0, |acc: f64, w| acc.max(w.abs()));
    Ok(KernelSpec {
        r,
        ell,
        weights,
        exact,
        w_max,
    })
}

/// Gauss-Jordan elimination on an augmented matrix (last column is the rhs).
/// The Gram matrix of distinct-node Vandermonde rows is positive definite, so
/// a nonzero pivot always exists.
fn solve_rational(mut aug: Vec<Vec<BigRational>>) -> Vec<BigRational> {
    let n = aug.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| aug[a][col].abs().cmp(&aug[b][col].abs()))
            .expect("non-empty system");
        aug.swap(col, pivot);
        let p = aug[col][col].clone();
        debug_assert!(!p.is_zero(), "singular moment system");
        for v in aug[col].iter_mut() {
            *v = &*v / &p;
        }
        for row in 0..n {
            if row != col && !aug[row][col].is_zero() {
                let factor = aug[row][col].clone();
                for c in col..=n {
                    let delta = &factor * &aug[col][c];
                    aug[row][c] -= delta;
                }
            }
        }
    }
    debug_assert!(aug.iter().enumerate().all(|(i, row)| row[i].is_one()));
    aug.into_iter().map(|row| row[n].clone()).collect()
}

/// Default kernel order, clipped to the largest order the bandwidth allows.
pub fn effective_order(ell: usize, r: usize) -> usize {
    ell.clamp(1, r + 1)
}

/// Similarity matrices over time, either raw or already smoothed.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilaritySequence {
    mats: Vec<DMatrix<f64>>,
    smoothed: bool,
    bandwidths: Vec<usize>,
}

impl SimilaritySequence {
    pub fn raw(mats: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = mats.first().map_or(0, |m| m.nrows());
        for (t, m) in mats.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(CascError::DimensionMismatch(format!("similarity at period {t} is not {n}x{n}")));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(CascError::InvalidInput(format!("non-finite similarity at period {t}")));
            }
        }
        let bandwidths = vec![0; mats.len()];
        Ok(SimilaritySequence {
            mats,
            smoothed: false,
            bandwidths,
        })
    }

    pub fn smoothed(mats: Vec<DMatrix<f64>>, bandwidths: Vec<usize>) -> Result<Self> {
        let mut seq = SimilaritySequence::raw(mats)?;
        if bandwidths.len() != seq.mats.len() {
            return Err(CascError::DimensionMismatch("one bandwidth per period".into()));
        }
        seq.smoothed = true;
        seq.bandwidths = bandwidths;
        Ok(seq)
    }

    pub fn at(&self, t: usize) -> &DMatrix<f64> {
        &self.mats[t]
    }

    pub fn mats(&self) -> &[DMatrix<f64>] {
        &self.mats
    }

    pub fn n_periods(&self) -> usize {
        self.mats.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.mats.first().map_or(0, |m| m.nrows())
    }

    pub fn is_smoothed(&self) -> bool {
        self.smoothed
    }

    pub fn bandwidths(&self) -> &[usize] {
        &self.bandwidths
    }
}

/// `(1/(r+1)) Σ_{i=-r}^{0} W(i) S_{t+i}`.
pub fn smooth_similarity(raw: &SimilaritySequence, t: usize, kernel: &KernelSpec) -> Result<DMatrix<f64>> {
    if raw.is_smoothed() {
        return Err(CascError::InvalidInput("smoothing expects a raw similarity sequence".into()));
    }
    if t >= raw.n_periods() {
        return Err(CascError::InvalidInput(format!("period {t} out of range")));
    }
    let r = kernel.r();
    if t < r {
        return Err(CascError::InsufficientHistory { t, r });
    }
    let n = raw.n_nodes();
    let mut acc: DMatrix<f64> = DMatrix::zeros(n, n);
    for (j, &w) in kernel.weights().iter().enumerate() {
        if w != 0.0 {
            acc += raw.at(t - r + j) * w;
        }
    }
    acc /= (r + 1) as f64;
    Ok(acc)
}

/// Outcome of one Lepski scan.
#[derive(Debug, Clone, PartialEq)]
pub struct LepskiChoice {
    pub bandwidth: usize,
    pub w_max: f64,
    /// `threshold[ρ]` is the tolerated gap against the bandwidth-`ρ` estimate.
    pub thresholds: Vec<f64>,
}

/// Adaptive bandwidth at period `t`.
///
/// Candidates `0..=r_max` are scanned upward; bandwidth `r` is admitted when
/// `‖Ŝ_r − Ŝ_ρ‖ ≤ 4 W_max sqrt(N ‖S_t‖_∞ / max(ρ, 1))` for every `ρ < r`. The
/// scan stops at the first rejected candidate, so every bandwidth at or below
/// the result is admissible.
pub fn lepski_bandwidth(raw: &SimilaritySequence, t: usize, ell: usize, r_max: usize) -> Result<usize> {
    lepski_scan(raw, t, ell, r_max).map(|c| c.bandwidth)
}

pub fn lepski_scan(raw: &SimilaritySequence, t: usize, ell: usize, r_max: usize) -> Result<LepskiChoice> {
    if t >= raw.n_periods() {
        return Err(CascError::InvalidInput(format!("period {t} out of range")));
    }
    if r_max > t || r_max > raw.n_periods() / 2 {
        return Err(CascError::InvalidInput(format!(
            "r_max = {r_max} exceeds min(t, T/2) = {}",
            t.min(raw.n_periods() / 2)
        )));
    }
    let kernels = (0..=r_max)
        .map(|r| build_kernel(r, effective_order(ell, r)))
        .collect::<Result<Vec<_>>>()?;
    let w_max = kernels.iter().map(KernelSpec::w_max).fold(0.0, f64::max);
    let estimates = crate::par::try_map_range(kernels.len(), |r| smooth_similarity(raw, t, &kernels[r]))?;
    let scale = raw.n_nodes() as f64 * max_abs(raw.at(t));
    let thresholds: Vec<f64> = (0..=r_max)
        .map(|rho| 4.0 * w_max * (scale / rho.max(1) as f64).sqrt())
        .collect();

    let admissible = |r: usize| {
        (0..r).all(|rho| {
            let diff = &estimates[r] - &estimates[rho];
            spectral_norm_within(&diff, thresholds[rho], LEPSKI_NORM_TOL, LEPSKI_NORM_MAX_ITER)
        })
    };
    let mut bandwidth = 0;
    for r in 1..=r_max {
        if !admissible(r) {
            break;
        }
        bandwidth = r;
    }
    Ok(LepskiChoice {
        bandwidth,
        w_max,
        thresholds,
    })
}
