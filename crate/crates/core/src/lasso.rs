//! Directed return-predictability networks from rolling-window adaptive
//! Lasso regressions of each asset's return on every other asset's lagged
//! return.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{CascError, Result};
use crate::model::{ReturnPanel, SparseBinary};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Bic,
    Aic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoConfig {
    pub window: usize,
    /// Exponent of the adaptive weights `1 / |pilot|^gamma`.
    pub gamma: f64,
    /// Explicit descending grid. When empty, `n_lambda` log-spaced points
    /// from `λ_max` down to `λ_max * lambda_ratio` are used.
    pub lambda_grid: Vec<f64>,
    pub n_lambda: usize,
    pub lambda_ratio: f64,
    pub selection: Selection,
    pub ridge_fallback: f64,
    /// Gram condition number at which the pilot switches to ridge.
    pub max_condition: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            window: 360,
            gamma: 1.0,
            lambda_grid: Vec::new(),
            n_lambda: 50,
            lambda_ratio: 1e-4,
            selection: Selection::Bic,
            ridge_fallback: 1e-4,
            max_condition: 1e8,
            tol: 1e-8,
            max_sweeps: 10_000,
        }
    }
}

impl LassoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(CascError::InvalidInput(format!("window {} is too short", self.window)));
        }
        if !(self.gamma > 0.0) {
            return Err(CascError::InvalidInput("gamma must be positive".into()));
        }
        if self.lambda_grid.iter().any(|l| !(*l > 0.0)) || self.lambda_grid.windows(2).any(|w| w[1] > w[0]) {
            return Err(CascError::InvalidInput("lambda grid must be positive and descending".into()));
        }
        if self.lambda_grid.is_empty() && (self.n_lambda == 0 || !(self.lambda_ratio > 0.0 && self.lambda_ratio < 1.0)) {
            return Err(CascError::InvalidInput("lambda grid is empty".into()));
        }
        Ok(())
    }
}

/// Z-scored window of a panel.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedWindow {
    /// `window x N`; excluded columns are all zero.
    pub z: DMatrix<f64>,
    /// Columns with zero variance or a missing observation in the window.
    pub excluded: Vec<bool>,
    pub first_day: usize,
}

/// Z-scores days `t_end - window .. t_end` column by column, using the
/// population standard deviation.
pub fn standardize_window(panel: &ReturnPanel, t_end: usize, window: usize) -> Result<StandardizedWindow> {
    if t_end < window || t_end > panel.n_days() || window < 2 {
        return Err(CascError::InsufficientHistory { t: t_end, r: window });
    }
    let first = t_end - window;
    let n = panel.n_assets();
    let mut z = DMatrix::zeros(window, n);
    let mut excluded = vec![false; n];
    for j in 0..n {
        if (first..t_end).any(|d| !panel.is_valid(d, j)) {
            excluded[j] = true;
            continue;
        }
        let col: Vec<f64> = (first..t_end).map(|d| panel.returns()[(d, j)]).collect();
        let mean = col.iter().sum::<f64>() / window as f64;
        let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / window as f64).sqrt();
        if !(sd > 1e-12 * mean.abs()) || sd == 0.0 {
            excluded[j] = true;
            continue;
        }
        for (d, x) in col.iter().enumerate() {
            z[(d, j)] = (x - mean) / sd;
        }
    }
    Ok(StandardizedWindow { z, excluded, first_day: first })
}

/// Result of one coordinate-descent solve.
#[derive(Debug, Clone, PartialEq)]
pub struct CdSolution {
    pub coef: Vec<f64>,
    pub sweeps: usize,
    /// Objective after each sweep.
    pub trace: Vec<f64>,
}

/// `(1/2n)‖y − Xb‖² + λ Σ w_j |b_j|`.
pub fn lasso_objective(x: &DMatrix<f64>, y: &DVector<f64>, coef: &[f64], lambda: f64, weights: &[f64]) -> f64 {
    let n = x.nrows() as f64;
    let resid = y - x * DVector::from_column_slice(coef);
    let penalty: f64 = coef
        .iter()
        .zip(weights)
        .filter(|(b, _)| **b != 0.0)
        .map(|(b, w)| w * b.abs())
        .sum();
    resid.norm_squared() / (2.0 * n) + lambda * penalty
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent for the weighted Lasso. Infinite weights pin a
/// coefficient at zero.
pub fn weighted_lasso(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    weights: &[f64],
    warm: Option<&[f64]>,
    tol: f64,
    max_sweeps: usize,
) -> Result<CdSolution> {
    let (n, p) = x.shape();
    if y.len() != n || weights.len() != p || warm.is_some_and(|w| w.len() != p) {
        return Err(CascError::DimensionMismatch(format!("lasso design is {n}x{p}")));
    }
    let nf = n as f64;
    let col_sq: Vec<f64> = (0..p).map(|j| x.column(j).norm_squared() / nf).collect();
    let fixed = |j: usize| !weights[j].is_finite() || col_sq[j] == 0.0;
    let mut coef: Vec<f64> = warm.map_or_else(|| vec![0.0; p], |w| w.to_vec());
    for (j, b) in coef.iter_mut().enumerate() {
        if fixed(j) {
            *b = 0.0;
        }
    }
    let mut resid = y - x * DVector::from_column_slice(&coef);
    let mut trace = Vec::new();
    for sweep in 1..=max_sweeps {
        let mut max_delta: f64 = 0.0;
        for j in 0..p {
            if fixed(j) {
                continue;
            }
            let xj = x.column(j);
            let old = coef[j];
            let rho = xj.dot(&resid) / nf + col_sq[j] * old;
            let new = soft_threshold(rho, lambda * weights[j]) / col_sq[j];
            if new != old {
                resid.axpy(old - new, &xj, 1.0);
                coef[j] = new;
                max_delta = max_delta.max((new - old).abs() * col_sq[j].sqrt());
            }
        }
        trace.push(lasso_objective(x, y, &coef, lambda, weights));
        if max_delta <= tol {
            return Ok(CdSolution { coef, sweeps: sweep, trace });
        }
    }
    Err(CascError::ConvergenceFailure {
        solver: "lasso coordinate descent",
        iterations: max_sweeps,
    })
}

/// Largest violation of the weighted-Lasso optimality conditions, with
/// `g = Xᵀ(y − Xb)/n`: `|g_j| ≤ λ w_j` where `b_j = 0`, and
/// `g_j = λ w_j sign(b_j)` otherwise.
pub fn kkt_violation(x: &DMatrix<f64>, y: &DVector<f64>, coef: &[f64], lambda: f64, weights: &[f64]) -> f64 {
    let n = x.nrows() as f64;
    let resid = y - x * DVector::from_column_slice(coef);
    let grad = x.tr_mul(&resid) / n;
    (0..coef.len())
        .filter(|&j| weights[j].is_finite())
        .map(|j| {
            let bound = lambda * weights[j];
            if coef[j] == 0.0 {
                (grad[j].abs() - bound).max(0.0)
            } else {
                (grad[j] - bound * coef[j].signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Selected model for one regression.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub weights: Vec<f64>,
    pub criterion: f64,
    pub pilot_ridge: bool,
}

impl LassoFit {
    pub fn active(&self) -> Vec<usize> {
        (0..self.coef.len()).filter(|&j| self.coef[j] != 0.0).collect()
    }
}

/// Least-squares pilot on centered data, or ridge when the Gram matrix is
/// singular or badly conditioned. Also returns whether ridge was used.
pub fn pilot_estimate(x: &DMatrix<f64>, y: &DVector<f64>, ridge: f64, max_condition: f64) -> (DVector<f64>, bool) {
    let n = x.nrows() as f64;
    let p = x.ncols();
    let gram = x.tr_mul(x) / n;
    let xty = x.tr_mul(y) / n;
    let eig = SymmetricEigen::new(gram.clone());
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if lo > 0.0 && hi / lo < max_condition {
        if let Some(ch) = gram.clone().cholesky() {
            return (ch.solve(&xty), false);
        }
    }
    let reg = gram + DMatrix::identity(p, p) * ridge;
    let sol = match reg.clone().cholesky() {
        Some(ch) => ch.solve(&xty),
        None => reg.lu().solve(&xty).unwrap_or_else(|| DVector::zeros(p)),
    };
    (sol, true)
}

/// Adaptive Lasso of `y` on the columns of `z` with an unpenalized
/// intercept, tuned over a descending λ grid by BIC (or AIC).
pub fn adaptive_lasso_row(y: &DVector<f64>, z: &DMatrix<f64>, config: &LassoConfig) -> Result<LassoFit> {
    config.validate()?;
    let (n, p) = z.shape();
    if y.len() != n {
        return Err(CascError::DimensionMismatch(format!("{} responses for {n} rows", y.len())));
    }
    let nf = n as f64;
    let y_mean = y.mean();
    let yc = y.add_scalar(-y_mean);
    let col_means: Vec<f64> = (0..p).map(|j| z.column(j).mean()).collect();
    let xc = DMatrix::from_fn(n, p, |i, j| z[(i, j)] - col_means[j]);

    let (pilot, pilot_ridge) = pilot_estimate(&xc, &yc, config.ridge_fallback, config.max_condition);
    let weights: Vec<f64> = pilot
        .iter()
        .map(|b| if *b == 0.0 { f64::INFINITY } else { 1.0 / b.abs().powf(config.gamma) })
        .collect();

    let grad0 = xc.tr_mul(&yc) / nf;
    let lambda_max = (0..p)
        .filter(|&j| weights[j].is_finite())
        .map(|j| grad0[j].abs() / weights[j])
        .fold(0.0, f64::max);
    let grid: Vec<f64> = if !config.lambda_grid.is_empty() {
        config.lambda_grid.clone()
    } else if lambda_max > 0.0 {
        let m = config.n_lambda;
        (0..m)
            .map(|i| {
                let frac = if m == 1 { 0.0 } else { i as f64 / (m - 1) as f64 };
                lambda_max * config.lambda_ratio.powf(frac)
            })
            .collect()
    } else {
        vec![1.0]
    };

    let penalty = |k: usize| match config.selection {
        Selection::Bic => k as f64 * nf.ln(),
        Selection::Aic => 2.0 * k as f64,
    };
    let score = |coef: &[f64]| {
        let rss = (&yc - &xc * DVector::from_column_slice(coef)).norm_squared();
        let k = coef.iter().filter(|b| **b != 0.0).count();
        nf * (rss / nf).max(f64::MIN_POSITIVE).ln() + penalty(k)
    };

    let mut warm = vec![0.0; p];
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for &lambda in &grid {
        // the null model solves exactly at lambda_max; solving would let rounding activate a coefficient
        let coef = if lambda >= lambda_max {
            vec![0.0; p]
        } else {
            weighted_lasso(&xc, &yc, lambda, &weights, Some(&warm), config.tol, config.max_sweeps)?.coef
        };
        let crit = score(&coef);
        if best.as_ref().is_none_or(|b| crit < b.0) {
            best = Some((crit, lambda, coef.clone()));
        }
        warm = coef;
    }
    let (criterion, lambda, coef) = best.expect("grid is never empty");
    let intercept = y_mean - coef.iter().zip(&col_means).map(|(b, m)| b * m).sum::<f64>();
    Ok(LassoFit {
        coef,
        intercept,
        lambda,
        weights,
        criterion,
        pilot_ridge,
    })
}

/// Directed network from the `window + 1` days ending before `t_end`:
/// edge `j -> i` (entry `(j, i)`) when asset `j`'s lagged return survives
/// in the regression for asset `i`.
///
/// Each series is standardized once over the whole span; responses are its
/// last `window` days and predictors the `window` days before them.
pub fn infer_network(panel: &ReturnPanel, config: &LassoConfig, t_end: usize) -> Result<SparseBinary> {
    config.validate()?;
    if t_end < config.window + 1 || t_end > panel.n_days() {
        return Err(CascError::InsufficientHistory {
            t: t_end,
            r: config.window + 1,
        });
    }
    let std = standardize_window(panel, t_end, config.window + 1)?;
    let n = panel.n_assets();
    let w = config.window;
    let incoming = par::try_map_range(n, |i| -> Result<Vec<usize>> {
        if std.excluded[i] {
            return Ok(Vec::new());
        }
        let sources: Vec<usize> = (0..n).filter(|&j| j != i && !std.excluded[j]).collect();
        if sources.is_empty() {
            return Ok(Vec::new());
        }
        let y = std.z.column(i).rows(1, w).into_owned();
        let x = DMatrix::from_fn(w, sources.len(), |d, k| std.z[(d, sources[k])]);
        let fit = adaptive_lasso_row(&y, &x, config)?;
        Ok(fit.active().into_iter().map(|k| sources[k]).collect())
    })?;
    let edges = incoming
        .into_iter()
        .enumerate()
        .flat_map(|(i, srcs)| srcs.into_iter().map(move |j| (j, i)));
    SparseBinary::from_edges(n, edges)
}

/// Networks for each `t_end` in `start..=end`, stepping by `step`.
pub fn infer_rolling(panel: &ReturnPanel, config: &LassoConfig, start: usize, end: usize, step: usize) -> Result<Vec<SparseBinary>> {
    (start..=end)
        .step_by(step.max(1))
        .map(|t| infer_network(panel, config, t))
        .collect()
}
