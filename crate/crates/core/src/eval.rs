//! Scoring: permutation-matched misclustering rates, within/cross-community
//! degrees and within/cross-community return correlations.

use crate::error::{CascError, Result};
use crate::model::{AdjacencySequence, MembershipSequence, ReturnPanel};
use crate::par;

/// Minimum-cost perfect assignment on a square cost matrix (Hungarian method
/// with potentials, O(n³)). Returns `assignment[row] = col`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; column 0 is the virtual start
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Confusion counts `c[est][truth]` on a `k x k` grid.
pub fn confusion(est: &[usize], truth: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut c = vec![vec![0usize; k]; k];
    for (&e, &t) in est.iter().zip(truth) {
        c[e][t] += 1;
    }
    c
}

/// Matched misclustering rate and the label map `est -> truth` achieving it.
pub fn miscluster_match(est: &[usize], truth: &[usize], k: usize) -> Result<(f64, Vec<usize>)> {
    if est.len() != truth.len() {
        return Err(CascError::DimensionMismatch(format!("{} estimated vs {} true labels", est.len(), truth.len())));
    }
    let k = est.iter().chain(truth).map(|&l| l + 1).max().unwrap_or(0).max(k);
    if est.is_empty() {
        return Ok((0.0, (0..k).collect()));
    }
    let c = confusion(est, truth, k);
    let cost: Vec<Vec<f64>> = c.iter().map(|row| row.iter().map(|&x| -(x as f64)).collect()).collect();
    let perm = hungarian(&cost);
    let agree: usize = perm.iter().enumerate().map(|(e, &t)| c[e][t]).sum();
    Ok(((est.len() - agree) as f64 / est.len() as f64, perm))
}

/// `min_π (1/N) #{i : π(est_i) ≠ truth_i}`.
pub fn miscluster_rate(est: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    miscluster_match(est, truth, k).map(|(rate, _)| rate)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MisclusterReport {
    pub row_rates: Vec<f64>,
    pub col_rates: Vec<f64>,
    pub row_mean: f64,
    pub col_mean: f64,
    pub row_matches: Vec<Vec<usize>>,
    pub col_matches: Vec<Vec<usize>>,
}

pub fn miscluster_sequence(est: &MembershipSequence, truth: &MembershipSequence) -> Result<MisclusterReport> {
    if est.n_periods() != truth.n_periods() || est.n_nodes() != truth.n_nodes() {
        return Err(CascError::DimensionMismatch(format!(
            "estimate is {}x{}, truth is {}x{}",
            est.n_periods(),
            est.n_nodes(),
            truth.n_periods(),
            truth.n_nodes()
        )));
    }
    let t = est.n_periods();
    let kr = est.k_rows().max(truth.k_rows());
    let kc = est.k_cols().max(truth.k_cols());
    let mut report = MisclusterReport {
        row_rates: Vec::with_capacity(t),
        col_rates: Vec::with_capacity(t),
        row_mean: 0.0,
        col_mean: 0.0,
        row_matches: Vec::with_capacity(t),
        col_matches: Vec::with_capacity(t),
    };
    for p in 0..t {
        let (r, rm) = miscluster_match(est.rows(p), truth.rows(p), kr)?;
        let (c, cm) = miscluster_match(est.cols(p), truth.cols(p), kc)?;
        report.row_rates.push(r);
        report.col_rates.push(c);
        report.row_matches.push(rm);
        report.col_matches.push(cm);
    }
    if t > 0 {
        report.row_mean = report.row_rates.iter().sum::<f64>() / t as f64;
        report.col_mean = report.col_rates.iter().sum::<f64>() / t as f64;
    }
    Ok(report)
}

/// Time-averaged within- and cross-community edge densities for
/// `community`, using the row labels (`rows = true`) or column labels.
pub fn community_degrees(adj: &AdjacencySequence, membership: &MembershipSequence, community: usize, rows: bool) -> Result<(f64, f64)> {
    if adj.n_periods() != membership.n_periods() || adj.n_nodes() != membership.n_nodes() {
        return Err(CascError::DimensionMismatch("adjacency and membership disagree in shape".into()));
    }
    let n = adj.n_nodes();
    let periods = adj.n_periods();
    if periods == 0 {
        return Ok((0.0, 0.0));
    }
    let mut within = 0.0;
    let mut cross = 0.0;
    for t in 0..periods {
        let labels = membership.side(t, rows);
        let inside: Vec<bool> = labels.iter().map(|&l| l == community).collect();
        let nc = inside.iter().filter(|&&b| b).count();
        if nc == 0 {
            return Err(CascError::EmptyCommunity { community, t });
        }
        let (mut w, mut x) = (0usize, 0usize);
        for (i, j) in adj.at(t).edges() {
            match (inside[i], inside[j]) {
                (true, true) => w += 1,
                (true, false) | (false, true) => x += 1,
                _ => {}
            }
        }
        within += w as f64 / (nc * nc) as f64;
        if nc < n {
            cross += x as f64 / (2 * nc * (n - nc)) as f64;
        }
    }
    Ok((within / periods as f64, cross / periods as f64))
}

/// Average within/cross correlations for one community.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityCorrelation {
    pub community: usize,
    pub within: Option<f64>,
    pub cross: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub communities: Vec<CommunityCorrelation>,
    /// Pair-windows skipped because a series had zero variance (or fewer
    /// than two joint observations).
    pub excluded_pairs: usize,
}

/// Pearson correlation over jointly valid observations; `None` when either
/// side has zero variance or fewer than two points remain.
pub fn pearson(a: &[Option<f64>], b: &[Option<f64>]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = a.iter().zip(b).filter_map(|(x, y)| Some(((*x)?, (*y)?))).collect();
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let (mx, my) = pairs.iter().fold((0.0, 0.0), |acc, (x, y)| (acc.0 + x / n, acc.1 + y / n));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Within/cross-community correlations of the next `horizon` daily returns.
///
/// Membership period `p` is formed at panel day `day_offset + p`; its window
/// is days `day_offset + p + 1 ..= day_offset + p + horizon`. Each period
/// contributes its mean pair correlation and periods are weighted equally.
pub fn community_correlations(
    panel: &ReturnPanel,
    membership: &MembershipSequence,
    horizon: usize,
    day_offset: usize,
    rows: bool,
) -> Result<CorrelationReport> {
    if membership.n_nodes() != panel.n_assets() {
        return Err(CascError::DimensionMismatch(format!(
            "{} membership nodes vs {} panel assets",
            membership.n_nodes(),
            panel.n_assets()
        )));
    }
    if horizon == 0 {
        return Err(CascError::InvalidInput("horizon must be positive".into()));
    }
    let periods = membership.n_periods();
    for p in 0..periods {
        let day = day_offset + p;
        if day + horizon >= panel.n_days() {
            return Err(CascError::InsufficientFuture {
                day,
                horizon,
                len: panel.n_days(),
            });
        }
    }
    let n = panel.n_assets();
    let k = if rows { membership.k_rows() } else { membership.k_cols() };

    // per period: (sum, count) for within and cross of each community, plus exclusions
    let per_period = par::map_range(periods, |p| {
        let day = day_offset + p;
        let series: Vec<Vec<Option<f64>>> = (0..n)
            .map(|j| (day + 1..=day + horizon).map(|d| panel.get(d, j)).collect())
            .collect();
        let labels = membership.side(p, rows);
        let mut within = vec![(0.0, 0usize); k];
        let mut cross = vec![(0.0, 0usize); k];
        let mut excluded = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let Some(rho) = pearson(&series[i], &series[j]) else {
                    excluded += 1;
                    continue;
                };
                let (a, b) = (labels[i], labels[j]);
                if a == b {
                    within[a].0 += rho;
                    within[a].1 += 1;
                } else {
                    cross[a].0 += rho;
                    cross[a].1 += 1;
                    cross[b].0 += rho;
                    cross[b].1 += 1;
                }
            }
        }
        (within, cross, excluded)
    });

    let mut excluded_pairs = 0;
    let mut acc_within = vec![(0.0, 0usize); k];
    let mut acc_cross = vec![(0.0, 0usize); k];
    for (within, cross, excluded) in per_period {
        excluded_pairs += excluded;
        for c in 0..k {
            if within[c].1 > 0 {
                acc_within[c].0 += within[c].0 / within[c].1 as f64;
                acc_within[c].1 += 1;
            }
            if cross[c].1 > 0 {
                acc_cross[c].0 += cross[c].0 / cross[c].1 as f64;
                acc_cross[c].1 += 1;
            }
        }
    }
    if excluded_pairs > 0 {
        log::info!("{excluded_pairs} pair windows excluded for zero variance");
    }
    let mean = |(s, c): (f64, usize)| (c > 0).then(|| s / c as f64);
    Ok(CorrelationReport {
        communities: (0..k)
            .map(|c| CommunityCorrelation {
                community: c,
                within: mean(acc_within[c]),
                cross: mean(acc_cross[c]),
            })
            .collect(),
        excluded_pairs,
    })
}
