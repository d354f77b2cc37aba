//! Spectral co-clustering of (smoothed) similarity matrices: truncated SVD,
//! row normalization onto the unit sphere, spherical k-medians, and the
//! dynamic / static detection pipelines built from them.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CascError, Result};
use crate::graph::{covariate_weights, laplacian, tuned_similarity};
use crate::kernel::{build_kernel, effective_order, lepski_bandwidth, smooth_similarity, SimilaritySequence};
use crate::model::{AdjacencySequence, CovariateMatrix, CovariateWeights, MembershipSequence};
use crate::par;
use crate::rng::{self, tag};

const SVD_EPS: f64 = 1e-12;
const SVD_MAX_ITER: usize = 10_000;
const ZERO_ROW_NORM: f64 = 1e-12;
const KMEDIANS_MAX_ITER: usize = 100;
const WEISZFELD_MAX_ITER: usize = 50;
const WEISZFELD_TOL: f64 = 1e-9;

/// Top-`K` singular triplets of a similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub zero_rows_u: Vec<bool>,
    pub zero_rows_v: Vec<bool>,
}

/// Top-`k` singular triplets of `s`, descending.
///
/// Each left singular vector is signed so that its largest-magnitude entry is
/// positive (first such entry on ties); the matching right vector takes the
/// same sign so that `U Σ Vᵀ` is unchanged.
pub fn truncated_svd(s: &DMatrix<f64>, k: usize) -> Result<SpectralEmbedding> {
    let n = s.nrows().min(s.ncols());
    if k == 0 || k > n {
        return Err(CascError::InvalidInput(format!("embedding dimension {k} not in 1..={n}")));
    }
    let svd = s.clone().try_svd(true, true, SVD_EPS, SVD_MAX_ITER).ok_or(CascError::ConvergenceFailure {
        solver: "svd",
        iterations: SVD_MAX_ITER,
    })?;
    let (u_full, vt_full) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => {
            return Err(CascError::ConvergenceFailure {
                solver: "svd",
                iterations: SVD_MAX_ITER,
            })
        }
    };
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));

    let mut u = DMatrix::zeros(s.nrows(), k);
    let mut v = DMatrix::zeros(s.ncols(), k);
    let mut sigma = Vec::with_capacity(k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        let ucol = u_full.column(idx);
        let pivot = ucol
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, &x)| if x.abs() > best.1.abs() { (i, x) } else { best });
        let sign = if pivot.1 < 0.0 { -1.0 } else { 1.0 };
        u.set_column(c, &(ucol * sign));
        v.set_column(c, &(vt_full.row(idx).transpose() * sign));
        sigma.push(svd.singular_values[idx].max(0.0));
    }
    let zero_rows = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).norm() <= ZERO_ROW_NORM).collect();
    Ok(SpectralEmbedding {
        zero_rows_u: zero_rows(&u),
        zero_rows_v: zero_rows(&v),
        u,
        v,
        sigma,
    })
}

/// Rows of `embedding` scaled to unit length, with masked rows dropped.
/// `index_map[k]` is the original row of output row `k`.
pub fn spherical_normalize(embedding: &DMatrix<f64>, zero_row_mask: &[bool]) -> (DMatrix<f64>, Vec<usize>) {
    let index_map: Vec<usize> = (0..embedding.nrows()).filter(|&i| !zero_row_mask[i]).collect();
    let mut out = DMatrix::zeros(index_map.len(), embedding.ncols());
    for (k, &i) in index_map.iter().enumerate() {
        let row = embedding.row(i);
        out.set_row(k, &(row / row.norm()));
    }
    (out, index_map)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMediansResult {
    pub labels: Vec<usize>,
    /// Unit-norm centers, one per cluster.
    pub centers: Vec<DVector<f64>>,
    /// Σ ‖x_i − c_{label(i)}‖.
    pub objective: f64,
    pub restarts_used: usize,
    /// Iterations of the winning restart.
    pub iterations: usize,
    /// Objective after every iteration of the winning restart.
    pub trace: Vec<f64>,
    /// Number of empty-cluster repairs performed in the winning restart.
    pub empty_repairs: usize,
}

/// Best of `restarts` runs of alternating spherical k-medians.
///
/// Restart `i` draws its seeding from the stream `(seed, i)`, so the result
/// does not depend on whether restarts run in parallel.
pub fn spherical_kmedians(points: &DMatrix<f64>, k: usize, restarts: usize, seed: u64) -> Result<KMediansResult> {
    let m = points.nrows();
    if k == 0 || m < k {
        return Err(CascError::InvalidInput(format!("cannot form {k} clusters from {m} points")));
    }
    let rows: Vec<Vec<f64>> = (0..m).map(|i| points.row(i).iter().copied().collect()).collect();
    let restarts = restarts.max(1);
    let runs = par::map_range(restarts, |r| kmedians_run(&rows, k, seed, r as u64));
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.objective < a.objective { b } else { a })
        .expect("at least one restart");
    Ok(KMediansResult {
        labels: best.labels,
        centers: best.centers.into_iter().map(DVector::from_vec).collect(),
        objective: best.objective,
        restarts_used: restarts,
        iterations: best.iterations,
        trace: best.trace,
        empty_repairs: best.empty_repairs,
    })
}

/// One restart, with centers kept as plain vectors.
struct Run {
    labels: Vec<usize>,
    centers: Vec<Vec<f64>>,
    objective: f64,
    iterations: usize,
    trace: Vec<f64>,
    empty_repairs: usize,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn nearest(x: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    centers
        .iter()
        .enumerate()
        .map(|(c, ctr)| (c, dist(x, ctr)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// k-medians++ seeding: first center uniform, then proportional to distance.
fn seed_centers(points: &[Vec<f64>], k: usize, rng: &mut rng::StreamRng) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    while centers.len() < k {
        let d: Vec<f64> = points.iter().map(|p| nearest(p, &centers).1).collect();
        let total: f64 = d.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = d.len() - 1;
            for (i, &di) in d.iter().enumerate() {
                if target < di {
                    idx = i;
                    break;
                }
                target -= di;
            }
            idx
        } else {
            rng.random_range(0..points.len())
        };
        centers.push(points[pick].clone());
    }
    centers
}

fn kmedians_run(points: &[Vec<f64>], k: usize, seed: u64, restart: u64) -> Run {
    let mut rng = rng::stream(seed, &[tag::KMEDIANS, restart]);
    let mut centers = seed_centers(points, k, &mut rng);
    let mut labels: Vec<usize> = vec![usize::MAX; points.len()];
    let mut trace = Vec::new();
    let mut empty_repairs = 0;
    let mut iterations = 0;
    let mut members: Vec<&[f64]> = Vec::with_capacity(points.len());

    for _ in 0..KMEDIANS_MAX_ITER {
        iterations += 1;
        let mut next: Vec<usize> = points.iter().map(|p| nearest(p, &centers).0).collect();
        empty_repairs += repair_empty(points, &mut centers, &mut next, k);
        let changed = next != labels;
        labels = next;
        for (c, center) in centers.iter_mut().enumerate() {
            members.clear();
            members.extend(points.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(p, _)| p.as_slice()));
            if let Some(updated) = spherical_median(&members, center) {
                *center = updated;
            }
        }
        trace.push(objective(points, &labels, &centers));
        if !changed {
            break;
        }
    }
    Run {
        objective: objective(points, &labels, &centers),
        labels,
        centers,
        iterations,
        trace,
        empty_repairs,
    }
}

/// Reseeds each empty cluster at the point farthest from its current center.
fn repair_empty(points: &[Vec<f64>], centers: &mut [Vec<f64>], labels: &mut [usize], k: usize) -> usize {
    let mut repairs = 0;
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return repairs;
        };
        let far = (0..points.len())
            .filter(|&i| counts[labels[i]] > 1)
            .map(|i| (i, dist(&points[i], &centers[labels[i]])))
            .fold(None, |best: Option<(usize, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        let Some((i, _)) = far else {
            return repairs;
        };
        log::debug!("k-medians: cluster {empty} emptied, reseeding at point {i}");
        centers[empty] = points[i].clone();
        labels[i] = empty;
        repairs += 1;
    }
}

/// Weiszfeld median of `members` projected back to the unit sphere. Returns
/// `None` (keep the old center) when the projection is undefined or would
/// not lower the cluster cost.
fn spherical_median(members: &[&[f64]], current: &[f64]) -> Option<Vec<f64>> {
    if members.is_empty() {
        return None;
    }
    let dim = current.len();
    let mut y = vec![0.0; dim];
    for p in members {
        y.iter_mut().zip(p.iter()).for_each(|(a, b)| *a += b);
    }
    y.iter_mut().for_each(|a| *a /= members.len() as f64);
    let mut next = vec![0.0; dim];
    for _ in 0..WEISZFELD_MAX_ITER {
        weiszfeld_step(members, &y, &mut next);
        let moved = dist(&next, &y);
        std::mem::swap(&mut y, &mut next);
        if moved <= WEISZFELD_TOL {
            break;
        }
    }
    let norm = y.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm <= 1e-12 {
        return None;
    }
    y.iter_mut().for_each(|a| *a /= norm);
    let cost = |c: &[f64]| members.iter().map(|p| dist(p, c)).sum::<f64>();
    (cost(&y) <= cost(current)).then_some(y)
}

/// One Weiszfeld update with the Vardi-Zhang correction for iterates that
/// land on a data point. Writes the new iterate into `out`.
fn weiszfeld_step(members: &[&[f64]], y: &[f64], out: &mut [f64]) {
    let dim = y.len();
    let mut num = vec![0.0; dim];
    let mut pull = vec![0.0; dim];
    let mut den = 0.0;
    let mut coincident = 0usize;
    for p in members {
        let d = dist(p, y);
        if d <= 1e-14 {
            coincident += 1;
            continue;
        }
        for a in 0..dim {
            num[a] += p[a] / d;
            pull[a] += (p[a] - y[a]) / d;
        }
        den += 1.0 / d;
    }
    let r = pull.iter().map(|a| a * a).sum::<f64>().sqrt();
    if den == 0.0 || (coincident > 0 && r == 0.0) {
        out.copy_from_slice(y);
        return;
    }
    let eta = coincident as f64;
    let (keep, stay) = if coincident == 0 { (1.0, 0.0) } else { ((1.0 - eta / r).max(0.0), (eta / r).min(1.0)) };
    for a in 0..dim {
        out[a] = num[a] / den * keep + y[a] * stay;
    }
}

fn objective(points: &[Vec<f64>], labels: &[usize], centers: &[Vec<f64>]) -> f64 {
    points.iter().zip(labels).map(|(p, &l)| dist(p, &centers[l])).sum()
}

/// Bandwidth policy for temporal smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Lepski selection over `0..=min(t, T/2, cap)`.
    Auto { cap: Option<usize> },
    /// Fixed bandwidth, shortened near the start of the sequence.
    Fixed(usize),
}

/// `auto`, `auto:<cap>` or a fixed integer.
impl std::str::FromStr for Bandwidth {
    type Err = CascError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || CascError::InvalidInput(format!("bandwidth must be `auto`, `auto:<cap>` or an integer, got {s:?}"));
        match s.strip_prefix("auto") {
            Some("") => Ok(Bandwidth::Auto { cap: None }),
            Some(rest) => {
                let cap = rest.strip_prefix(':').and_then(|c| c.parse().ok()).ok_or_else(bad)?;
                Ok(Bandwidth::Auto { cap: Some(cap) })
            }
            None => s.parse().map(Bandwidth::Fixed).map_err(|_| bad()),
        }
    }
}

/// Community-detection method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Covariate-assisted, temporally smoothed.
    #[serde(rename = "casc-dyn")]
    CascDynamic,
    /// Covariate-assisted, one period at a time.
    #[serde(rename = "casc-static")]
    CascStatic,
    /// Degree-corrected directed spectral clustering, no covariates.
    #[serde(rename = "disim-dc")]
    DisimDc,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::CascDynamic, Method::CascStatic, Method::DisimDc];

    pub fn name(self) -> &'static str {
        match self {
            Method::CascDynamic => "casc-dyn",
            Method::CascStatic => "casc-static",
            Method::DisimDc => "disim-dc",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = CascError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| CascError::InvalidInput(format!("unknown method {s:?} (expected casc-dyn, casc-static or disim-dc)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub k_rows: usize,
    pub k_cols: usize,
    pub ell: usize,
    pub bandwidth: Bandwidth,
    /// Whether the covariate term enters the similarity.
    pub use_covariates: bool,
    pub restarts: usize,
    pub seed: u64,
}

impl DetectConfig {
    pub fn new(k_rows: usize, k_cols: usize) -> Self {
        DetectConfig {
            k_rows,
            k_cols,
            ell: 4,
            bandwidth: Bandwidth::Auto { cap: None },
            use_covariates: true,
            restarts: 10,
            seed: 0,
        }
    }

    /// Same settings specialised to `method`.
    pub fn for_method(&self, method: Method) -> Self {
        let mut cfg = self.clone();
        match method {
            Method::CascDynamic => {
                cfg.use_covariates = true;
                if cfg.bandwidth == Bandwidth::Fixed(0) {
                    cfg.bandwidth = Bandwidth::Auto { cap: None };
                }
            }
            Method::CascStatic => {
                cfg.use_covariates = true;
                cfg.bandwidth = Bandwidth::Fixed(0);
            }
            Method::DisimDc => {
                cfg.use_covariates = false;
                cfg.bandwidth = Bandwidth::Fixed(0);
            }
        }
        cfg
    }

    fn embedding_dim(&self) -> usize {
        self.k_rows.min(self.k_cols)
    }

    fn check(&self) -> Result<()> {
        if self.k_rows == 0 || self.k_cols == 0 {
            return Err(CascError::InvalidInput("K_R and K_C must be at least 1".into()));
        }
        if self.ell == 0 {
            return Err(CascError::InvalidInput("kernel order must be at least 1".into()));
        }
        Ok(())
    }
}

/// Estimated memberships plus per-period diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub memberships: MembershipSequence,
    pub bandwidths: Vec<usize>,
    pub alphas: Vec<f64>,
    pub objectives: Vec<(f64, f64)>,
}

/// Runs the full dynamic pipeline with adoption-rate covariate weights.
pub fn detect_communities(adj: &AdjacencySequence, cov: &CovariateMatrix, config: &DetectConfig) -> Result<MembershipSequence> {
    detect_with_weights(adj, cov, &covariate_weights(cov), config).map(|d| d.memberships)
}

/// Directed spectral clustering period by period, no covariates.
pub fn detect_disim_dc(adj: &AdjacencySequence, config: &DetectConfig) -> Result<MembershipSequence> {
    let cov = CovariateMatrix::zeros(adj.n_nodes());
    detect_with_weights(adj, &cov, &CovariateWeights::identity(1), &config.for_method(Method::DisimDc)).map(|d| d.memberships)
}

/// Covariate-assisted clustering period by period, no smoothing.
pub fn detect_casc_static(adj: &AdjacencySequence, cov: &CovariateMatrix, config: &DetectConfig) -> Result<MembershipSequence> {
    detect_with_weights(adj, cov, &covariate_weights(cov), &config.for_method(Method::CascStatic)).map(|d| d.memberships)
}

/// Dispatches on `method`, using `config` for everything else.
pub fn detect_method(
    method: Method,
    adj: &AdjacencySequence,
    cov: &CovariateMatrix,
    weights: &CovariateWeights,
    config: &DetectConfig,
) -> Result<Detection> {
    detect_with_weights(adj, cov, weights, &config.for_method(method))
}

/// Full pipeline with caller-supplied covariate weights.
pub fn detect_with_weights(
    adj: &AdjacencySequence,
    cov: &CovariateMatrix,
    weights: &CovariateWeights,
    config: &DetectConfig,
) -> Result<Detection> {
    config.check()?;
    let n = adj.n_nodes();
    if cov.n_nodes() != n {
        return Err(CascError::DimensionMismatch(format!("{} covariate rows for {n} nodes", cov.n_nodes())));
    }
    if adj.n_periods() == 0 {
        return Err(CascError::InvalidInput("no periods".into()));
    }
    let k = config.embedding_dim();
    let raw = par::try_map_range(adj.n_periods(), |t| {
        if config.use_covariates && k < n {
            tuned_similarity(adj, cov, weights, k, t).map(|p| (p.similarity, p.alpha))
        } else {
            laplacian(adj, t).map(|l| (l, 0.0))
        }
    })?;
    let (mats, alphas): (Vec<_>, Vec<_>) = raw.into_iter().unzip();
    let mut detection = cluster_similarities(&SimilaritySequence::raw(mats)?, config)?;
    detection.alphas = alphas;
    Ok(detection)
}

/// Smoothing, embedding and clustering on an already-built raw similarity
/// sequence.
pub fn cluster_similarities(raw: &SimilaritySequence, config: &DetectConfig) -> Result<Detection> {
    config.check()?;
    let periods = raw.n_periods();
    let per_period = par::try_map_range(periods, |t| {
        let r = match config.bandwidth {
            Bandwidth::Fixed(r) => r.min(t),
            Bandwidth::Auto { cap } => {
                let r_max = t.min(periods / 2).min(cap.unwrap_or(usize::MAX));
                lepski_bandwidth(raw, t, config.ell, r_max)?
            }
        };
        let smoothed = if r == 0 {
            raw.at(t).clone()
        } else {
            smooth_similarity(raw, t, &build_kernel(r, effective_order(config.ell, r))?)?
        };
        let (rows, cols, obj) = cluster_period(&smoothed, config)?;
        Ok((r, rows, cols, obj))
    })?;
    let mut bandwidths = Vec::with_capacity(periods);
    let mut row_labels = Vec::with_capacity(periods);
    let mut col_labels = Vec::with_capacity(periods);
    let mut objectives = Vec::with_capacity(periods);
    for (r, rows, cols, obj) in per_period {
        bandwidths.push(r);
        row_labels.push(rows);
        col_labels.push(cols);
        objectives.push(obj);
    }
    Ok(Detection {
        memberships: MembershipSequence::new_relaxed(config.k_rows, config.k_cols, row_labels, col_labels)?,
        bandwidths,
        alphas: vec![0.0; periods],
        objectives,
    })
}

/// Row and column labels for one smoothed similarity matrix. The k-medians
/// streams depend only on the seed and the side, so equal inputs give equal
/// labels in every period.
pub fn cluster_period(s: &DMatrix<f64>, config: &DetectConfig) -> Result<(Vec<usize>, Vec<usize>, (f64, f64))> {
    let n = s.nrows();
    let k = config.embedding_dim().min(n);
    let emb = truncated_svd(s, k)?;
    let side = |basis: &DMatrix<f64>, mask: &[bool], clusters: usize, side_tag: u64| -> Result<(Vec<usize>, f64)> {
        let mut labels = vec![0usize; n];
        if clusters == 1 {
            return Ok((labels, 0.0));
        }
        let (points, index_map) = spherical_normalize(basis, mask);
        if points.nrows() == 0 {
            return Ok((labels, 0.0));
        }
        let seed = rng::derive_seed(config.seed, &[tag::DETECT, side_tag]);
        let result = spherical_kmedians(&points, clusters.min(points.nrows()), config.restarts, seed)?;
        for (&i, &l) in index_map.iter().zip(&result.labels) {
            labels[i] = l;
        }
        Ok((labels, result.objective))
    };
    let (rows, obj_r) = side(&emb.u, &emb.zero_rows_u, config.k_rows, 0)?;
    let (cols, obj_c) = side(&emb.v, &emb.zero_rows_v, config.k_cols, 1)?;
    Ok((rows, cols, (obj_r, obj_c)))
}
