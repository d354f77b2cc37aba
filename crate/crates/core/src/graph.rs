//! Degrees, the regularized directed Laplacian, covariate similarity, the
//! covariate balance parameter and the combined similarity matrix.

use nalgebra::DMatrix;

use crate::error::{CascError, Result};
use crate::linalg::singular_values;
use crate::model::{AdjacencySequence, CovariateMatrix, CovariateWeights};

/// Regularized out/in degrees of one period.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreePair {
    pub d_row: Vec<f64>,
    pub d_col: Vec<f64>,
    pub tau_row: f64,
    pub tau_col: f64,
}

/// Per-period covariate balance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSchedule {
    values: Vec<f64>,
}

impl AlphaSchedule {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(CascError::InvalidInput(format!("alpha must be finite and >= 0, got {v}")));
        }
        Ok(AlphaSchedule { values })
    }

    pub fn zeros(t: usize) -> Self {
        AlphaSchedule { values: vec![0.0; t] }
    }

    pub fn at(&self, t: usize) -> f64 {
        self.values[t]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Out/in degrees plus the average-degree regularizers of period `t`.
pub fn degrees(adj: &AdjacencySequence, t: usize) -> Result<DegreePair> {
    let a = adj.at(t);
    let n = adj.n_nodes();
    let out_deg = a.out_degrees();
    let in_deg = a.in_degrees();
    let tau_row = out_deg.iter().sum::<usize>() as f64 / n as f64;
    let tau_col = in_deg.iter().sum::<usize>() as f64 / n as f64;
    let d_row: Vec<f64> = out_deg.iter().map(|&d| d as f64 + tau_row).collect();
    let d_col: Vec<f64> = in_deg.iter().map(|&d| d as f64 + tau_col).collect();
    if d_row.iter().chain(&d_col).any(|&d| d <= 0.0) {
        return Err(CascError::DegenerateGraph { t });
    }
    Ok(DegreePair {
        d_row,
        d_col,
        tau_row,
        tau_col,
    })
}

/// `D_R^{-1/2} A_t D_C^{-1/2}` as a dense matrix.
pub fn laplacian(adj: &AdjacencySequence, t: usize) -> Result<DMatrix<f64>> {
    let deg = degrees(adj, t)?;
    let n = adj.n_nodes();
    let mut l = DMatrix::zeros(n, n);
    for (i, j) in adj.at(t).edges() {
        l[(i, j)] = 1.0 / (deg.d_row[i] * deg.d_col[j]).sqrt();
    }
    Ok(l)
}

/// Laplacian of a weighted (expected) adjacency matrix, with the same
/// average-degree regularization. Used for population quantities.
pub fn weighted_laplacian(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let out: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    let inn: Vec<f64> = (0..n).map(|j| a.column(j).sum()).collect();
    let tau_row = out.iter().sum::<f64>() / n as f64;
    let tau_col = inn.iter().sum::<f64>() / n as f64;
    let d_row: Vec<f64> = out.iter().map(|d| d + tau_row).collect();
    let d_col: Vec<f64> = inn.iter().map(|d| d + tau_col).collect();
    if d_row.iter().chain(&d_col).any(|&d| d <= 0.0) {
        return None;
    }
    Some(DMatrix::from_fn(n, n, |i, j| a[(i, j)] / (d_row[i] * d_col[j]).sqrt()))
}

/// Adoption-rate weights `W(a, b) = (N_a / N)(N_b / N)`, where `N_a` counts
/// nodes with a nonzero entry in covariate column `a`.
pub fn covariate_weights(cov: &CovariateMatrix) -> CovariateWeights {
    let x = cov.matrix();
    let n = x.nrows().max(1) as f64;
    let rates: Vec<f64> = (0..x.ncols())
        .map(|a| x.column(a).iter().filter(|v| **v != 0.0).count() as f64 / n)
        .collect();
    let r = rates.len();
    let w = DMatrix::from_fn(r, r, |a, b| rates[a] * rates[b]);
    CovariateWeights::new_unchecked(vec![w])
}

/// Adoption-rate weights per period from a time-varying activity mask
/// (`active[t][i * R + a]`, row-major N x R).
pub fn covariate_weights_masked(cov: &CovariateMatrix, active: &[Vec<bool>]) -> Result<CovariateWeights> {
    let x = cov.matrix();
    let (n, r) = x.shape();
    let mut mats = Vec::with_capacity(active.len());
    for (t, mask) in active.iter().enumerate() {
        if mask.len() != n * r {
            return Err(CascError::DimensionMismatch(format!("activity mask at period {t} is not {n}x{r}")));
        }
        let rates: Vec<f64> = (0..r)
            .map(|a| (0..n).filter(|&i| mask[i * r + a] && x[(i, a)] != 0.0).count() as f64 / n as f64)
            .collect();
        mats.push(DMatrix::from_fn(r, r, |a, b| rates[a] * rates[b]));
    }
    Ok(CovariateWeights::new_unchecked(mats))
}

/// `X W_t Xᵀ`.
pub fn covariate_similarity(cov: &CovariateMatrix, weights: &CovariateWeights, t: usize) -> Result<DMatrix<f64>> {
    let x = cov.matrix();
    let w = weights.at(t);
    if w.nrows() != x.ncols() || w.ncols() != x.ncols() {
        return Err(CascError::DimensionMismatch(format!(
            "weights are {}x{} but there are {} covariates",
            w.nrows(),
            w.ncols(),
            x.ncols()
        )));
    }
    Ok(x * w * x.transpose())
}

/// `(σ_K(L) − σ_{K+1}(L)) / σ_1(C)`, or 0 when the gap is not positive or
/// the covariate term vanishes.
pub fn alpha_tune(lap: &DMatrix<f64>, covsim: &DMatrix<f64>, k: usize) -> Result<f64> {
    if k == 0 || k + 1 > lap.nrows() {
        return Err(CascError::InvalidInput(format!(
            "alpha tuning needs 1 <= K < N, got K = {k}, N = {}",
            lap.nrows()
        )));
    }
    let c1 = singular_values(covsim).first().copied().unwrap_or(0.0);
    if c1 <= 0.0 {
        return Ok(0.0);
    }
    let s = singular_values(lap);
    let gap = s[k - 1] - s[k];
    Ok(if gap > 0.0 { gap / c1 } else { 0.0 })
}

/// `S_t = L_{τ,t} + α_t X W_t Xᵀ`.
pub fn similarity(
    adj: &AdjacencySequence,
    cov: &CovariateMatrix,
    weights: &CovariateWeights,
    alpha: &AlphaSchedule,
    t: usize,
) -> Result<DMatrix<f64>> {
    let l = laplacian(adj, t)?;
    let a = alpha.at(t);
    if a == 0.0 {
        return Ok(l);
    }
    Ok(l + covariate_similarity(cov, weights, t)? * a)
}

/// Laplacian, covariate similarity and tuned alpha for one period.
#[derive(Debug, Clone)]
pub struct PeriodSimilarity {
    pub similarity: DMatrix<f64>,
    pub alpha: f64,
}

/// Builds `S_t` with `α_t` tuned from the period's own spectrum.
pub fn tuned_similarity(
    adj: &AdjacencySequence,
    cov: &CovariateMatrix,
    weights: &CovariateWeights,
    k: usize,
    t: usize,
) -> Result<PeriodSimilarity> {
    let l = laplacian(adj, t)?;
    let c = covariate_similarity(cov, weights, t)?;
    let alpha = alpha_tune(&l, &c, k)?;
    Ok(PeriodSimilarity {
        similarity: if alpha == 0.0 { l } else { l + c * alpha },
        alpha,
    })
}
