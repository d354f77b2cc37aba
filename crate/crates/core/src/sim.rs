//! Synthetic dynamic degree-corrected contextual blockmodels.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Pareto};
use serde::{Deserialize, Serialize};

use crate::error::{CascError, Result};
use crate::graph::{alpha_tune, covariate_weights, weighted_laplacian};
use crate::kernel::SimilaritySequence;
use crate::model::{
    AdjacencySequence, BlockProbabilitySequence, CovariateMatrix, DegreeParameters, MembershipSequence, SparseBinary,
};
use crate::rng::{self, tag};
use crate::{par, Result as CascResult};

/// The four-block base matrix used in the simulation study.
pub fn study_block_matrix() -> Vec<Vec<f64>> {
    vec![
        vec![0.60, 0.30, 0.20, 0.10],
        vec![0.30, 0.50, 0.20, 0.10],
        vec![0.20, 0.20, 0.40, 0.10],
        vec![0.10, 0.10, 0.10, 0.30],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeProfile {
    /// `B_t = B_base · (T + 2t) / (2T)` with 1-based `t`.
    Linear,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateLaw {
    /// i.i.d. U(0, 10), unrelated to communities.
    Uniform0To10,
    /// One active indicator per node aligned with its period-0 row community,
    /// replaced by a random indicator with probability 5%.
    Indicator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeLaw {
    UniformWithinBlock,
    /// Pareto(1, 3) heterogeneity, block-normalized.
    Power,
}

/// How the block-normalized ψ enter the edge probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeScaling {
    /// `P(i,j) = |k| ψ_i · |l| ψ_j · B(k,l)`: degree factors average one
    /// within a block, so uniform ψ reproduces `P = B`.
    BlockMean,
    /// `P(i,j) = ψ_i ψ_j B(k,l)` with block sums of ψ equal to one.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n: usize,
    pub t: usize,
    pub k_rows: usize,
    pub k_cols: usize,
    /// Nodes whose labels are re-drawn at each transition (the first `s`).
    pub s: usize,
    pub b_base: Vec<Vec<f64>>,
    pub time_profile: TimeProfile,
    /// Covariate count; defaults to `floor(ln(N T))`.
    pub r: Option<usize>,
    pub covariate_law: CovariateLaw,
    pub degree_law: DegreeLaw,
    pub degree_scaling: DegreeScaling,
    /// Use the row memberships for the columns as well.
    pub tie_row_col: bool,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 200,
            t: 10,
            k_rows: 4,
            k_cols: 4,
            s: 10,
            b_base: study_block_matrix(),
            time_profile: TimeProfile::Linear,
            r: None,
            covariate_law: CovariateLaw::Uniform0To10,
            degree_law: DegreeLaw::UniformWithinBlock,
            degree_scaling: DegreeScaling::BlockMean,
            tie_row_col: false,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn n_covariates(&self) -> usize {
        self.r
            .unwrap_or_else(|| ((self.n * self.t) as f64).ln().floor().max(1.0) as usize)
            .max(1)
    }

    pub fn base_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.k_rows, self.k_cols, |i, j| self.b_base[i][j])
    }

    /// Multiplier applied to `B_base` at period `t` (0-based).
    pub fn time_factor(&self, t: usize) -> f64 {
        match self.time_profile {
            TimeProfile::Constant => 1.0,
            TimeProfile::Linear => (self.t + 2 * (t + 1)) as f64 / (2 * self.t) as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CascError::InfeasibleConfig(m));
        if self.n == 0 || self.t == 0 || self.k_rows == 0 || self.k_cols == 0 {
            return bad("N, T, K_R and K_C must be positive".into());
        }
        if self.s > self.n {
            return bad(format!("s = {} exceeds N = {}", self.s, self.n));
        }
        if self.n < self.k_rows.max(self.k_cols) {
            return bad(format!("N = {} is smaller than the number of communities", self.n));
        }
        if self.b_base.len() != self.k_rows || self.b_base.iter().any(|row| row.len() != self.k_cols) {
            return bad(format!("B_base must be {}x{}", self.k_rows, self.k_cols));
        }
        if self.b_base.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return bad("B_base entries must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Period-0 labels drawn uniformly (retrying until every community is
/// populated); afterwards the first `s` labels are re-drawn each period and
/// the rest carried over.
pub fn gen_memberships(config: &SimConfig) -> Result<MembershipSequence> {
    config.validate()?;
    let rows = gen_side(config, config.k_rows, tag::MEMBERSHIP_ROWS)?;
    let cols = if config.tie_row_col && config.k_rows == config.k_cols {
        rows.clone()
    } else {
        gen_side(config, config.k_cols, tag::MEMBERSHIP_COLS)?
    };
    MembershipSequence::new(config.k_rows, config.k_cols, rows, cols)
}

const MAX_DRAWS: usize = 10_000;

fn gen_side(config: &SimConfig, k: usize, side: u64) -> Result<Vec<Vec<usize>>> {
    let mut rng = rng::stream(config.seed, &[tag::SIMULATE, side]);
    let populated = |labels: &[usize]| {
        let mut seen = vec![false; k];
        labels.iter().for_each(|&l| seen[l] = true);
        seen.into_iter().all(|s| s)
    };
    let mut first = None;
    for _ in 0..MAX_DRAWS {
        let labels: Vec<usize> = (0..config.n).map(|_| rng.random_range(0..k)).collect();
        if populated(&labels) {
            first = Some(labels);
            break;
        }
    }
    let mut seq = vec![first.ok_or_else(|| CascError::InfeasibleConfig("could not draw populated communities".into()))?];
    for t in 1..config.t {
        let prev = &seq[t - 1];
        let mut next = None;
        for _ in 0..MAX_DRAWS {
            let mut labels = prev.clone();
            labels[..config.s].iter_mut().for_each(|l| *l = rng.random_range(0..k));
            if populated(&labels) {
                next = Some(labels);
                break;
            }
        }
        seq.push(next.ok_or_else(|| {
            CascError::InfeasibleConfig(format!("re-drawing {} labels cannot repopulate every community at period {t}", config.s))
        })?);
    }
    Ok(seq)
}

pub fn gen_block_probs(config: &SimConfig) -> Result<BlockProbabilitySequence> {
    let base = config.base_matrix();
    let mats = (0..config.t).map(|t| &base * config.time_factor(t)).collect();
    BlockProbabilitySequence::new(mats)
}

/// Positive degree heterogeneity weights before block normalization.
fn gen_theta(config: &SimConfig, side: u64) -> Vec<f64> {
    match config.degree_law {
        DegreeLaw::UniformWithinBlock => vec![1.0; config.n],
        DegreeLaw::Power => {
            let mut rng = rng::stream(config.seed, &[tag::SIMULATE, tag::DEGREES, side]);
            let pareto = Pareto::new(1.0, 3.0).expect("valid Pareto parameters");
            (0..config.n).map(|_| pareto.sample(&mut rng)).collect()
        }
    }
}

/// Per-node multipliers at period `t` for one side.
fn degree_multipliers(config: &SimConfig, theta: &[f64], labels: &[usize], k: usize) -> Vec<f64> {
    let psi = DegreeParameters::block_normalize(theta, labels, k);
    match config.degree_scaling {
        DegreeScaling::Raw => psi,
        DegreeScaling::BlockMean => {
            let mut sizes = vec![0usize; k];
            labels.iter().for_each(|&l| sizes[l] += 1);
            psi.iter().zip(labels).map(|(p, &l)| p * sizes[l] as f64).collect()
        }
    }
}

/// Independent Bernoulli draws of every off-diagonal entry of `p`.
pub fn sample_adjacency<R: Rng>(p: &DMatrix<f64>, rng: &mut R) -> SparseBinary {
    let n = p.nrows();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < p[(i, j)] {
                edges.push((i, j));
            }
        }
    }
    SparseBinary::from_edges(n, edges).expect("indices within bounds")
}

/// Everything `gen_network` draws.
#[derive(Debug, Clone)]
pub struct SimBundle {
    pub adjacency: AdjacencySequence,
    pub covariates: CovariateMatrix,
    pub memberships: MembershipSequence,
    /// Block-normalized degree parameters, one per period.
    pub degrees: Vec<DegreeParameters>,
    pub blocks: BlockProbabilitySequence,
    /// Entries of `P_t` clipped to 1, summed over periods.
    pub clipped: usize,
}

/// Edge probabilities `P_t`, including the diagonal (callers zero it when
/// sampling). Returns the matrix and the number of clipped entries.
pub fn edge_probabilities(
    config: &SimConfig,
    memberships: &MembershipSequence,
    blocks: &BlockProbabilitySequence,
    t: usize,
) -> (DMatrix<f64>, usize) {
    let theta_r = gen_theta(config, 0);
    let theta_c = gen_theta(config, 1);
    probabilities_with(config, memberships, blocks, &theta_r, &theta_c, t)
}

fn probabilities_with(
    config: &SimConfig,
    memberships: &MembershipSequence,
    blocks: &BlockProbabilitySequence,
    theta_r: &[f64],
    theta_c: &[f64],
    t: usize,
) -> (DMatrix<f64>, usize) {
    let (zr, zc) = (memberships.rows(t), memberships.cols(t));
    let mr = degree_multipliers(config, theta_r, zr, config.k_rows);
    let mc = degree_multipliers(config, theta_c, zc, config.k_cols);
    let b = blocks.at(t);
    let mut clipped = 0;
    let p = DMatrix::from_fn(config.n, config.n, |i, j| {
        let v = mr[i] * mc[j] * b[(zr[i], zc[j])];
        if v > 1.0 {
            if i != j {
                clipped += 1;
            }
            1.0
        } else {
            v
        }
    });
    (p, clipped)
}

fn gen_covariates(config: &SimConfig, memberships: &MembershipSequence) -> Result<CovariateMatrix> {
    let r = config.n_covariates();
    let mut rng = rng::stream(config.seed, &[tag::SIMULATE, tag::COVARIATES]);
    let x = match config.covariate_law {
        CovariateLaw::Uniform0To10 => {
            let mut x = DMatrix::zeros(config.n, r);
            for i in 0..config.n {
                for a in 0..r {
                    x[(i, a)] = rng.random_range(0.0..10.0);
                }
            }
            x
        }
        CovariateLaw::Indicator => {
            let mut x = DMatrix::zeros(config.n, r);
            for (i, &label) in memberships.rows(0).iter().enumerate() {
                let a = if rng.random::<f64>() < 0.05 { rng.random_range(0..r) } else { label % r };
                x[(i, a)] = 1.0;
            }
            x
        }
    };
    CovariateMatrix::new(x)
}

/// Samples memberships, degree parameters, covariates and the adjacency
/// sequence.
pub fn gen_network(config: &SimConfig) -> Result<SimBundle> {
    let memberships = gen_memberships(config)?;
    let blocks = gen_block_probs(config)?;
    let theta_r = gen_theta(config, 0);
    let theta_c = gen_theta(config, 1);
    let sampled: Vec<(SparseBinary, usize)> = par::try_map_range(config.t, |t| -> CascResult<_> {
        let (p, clipped) = probabilities_with(config, &memberships, &blocks, &theta_r, &theta_c, t);
        let mut rng = rng::stream(config.seed, &[tag::SIMULATE, tag::EDGES, t as u64]);
        Ok((sample_adjacency(&p, &mut rng), clipped))
    })?;
    let clipped: usize = sampled.iter().map(|(_, c)| c).sum();
    if clipped > 0 {
        log::warn!("{clipped} edge probabilities exceeded 1 and were clipped");
    }
    let adjacency = AdjacencySequence::new(config.n, sampled.into_iter().map(|(m, _)| m).collect())?;
    let covariates = gen_covariates(config, &memberships)?;
    let degrees = (0..config.t)
        .map(|t| DegreeParameters {
            psi_rows: DegreeParameters::block_normalize(&theta_r, memberships.rows(t), config.k_rows),
            psi_cols: DegreeParameters::block_normalize(&theta_c, memberships.cols(t), config.k_cols),
        })
        .collect();
    Ok(SimBundle {
        adjacency,
        covariates,
        memberships,
        degrees,
        blocks,
        clipped,
    })
}

/// Expected covariate matrix under the configured law.
pub fn population_covariates(config: &SimConfig, memberships: &MembershipSequence) -> CovariateMatrix {
    let r = config.n_covariates();
    let x = match config.covariate_law {
        CovariateLaw::Uniform0To10 => DMatrix::from_element(config.n, r, 5.0),
        CovariateLaw::Indicator => DMatrix::from_fn(config.n, r, |i, a| {
            let hit = if memberships.rows(0)[i] % r == a { 0.95 } else { 0.0 };
            hit + 0.05 / r as f64
        }),
    };
    CovariateMatrix::new_unchecked(x)
}

/// Noiseless similarity sequence `L(𝒜_t) + α_t 𝒳 W 𝒳ᵀ` with
/// `𝒜_t = Ψ^R Z_R B_t Z_Cᵀ Ψ^C` (diagonal included) and `α_t` tuned on the
/// population spectrum.
pub fn population_similarity(config: &SimConfig, memberships: &MembershipSequence, use_covariates: bool) -> Result<SimilaritySequence> {
    config.validate()?;
    let blocks = gen_block_probs(config)?;
    let theta_r = gen_theta(config, 0);
    let theta_c = gen_theta(config, 1);
    let xpop = population_covariates(config, memberships);
    let weights = covariate_weights(&xpop);
    let k = config.k_rows.min(config.k_cols);
    let mats = par::try_map_range(config.t, |t| -> CascResult<DMatrix<f64>> {
        let (a, _) = probabilities_with(config, memberships, &blocks, &theta_r, &theta_c, t);
        let l = weighted_laplacian(&a).ok_or(CascError::DegenerateGraph { t })?;
        if !use_covariates || k >= config.n {
            return Ok(l);
        }
        let c = xpop.matrix() * weights.at(t) * xpop.matrix().transpose();
        let alpha = alpha_tune(&l, &c, k)?;
        Ok(l + c * alpha)
    })?;
    SimilaritySequence::raw(mats)
}

/// Draws memberships from `config` and returns them with the matching
/// population similarity sequence.
pub fn gen_population_similarity(config: &SimConfig, use_covariates: bool) -> Result<(MembershipSequence, SimilaritySequence)> {
    let memberships = gen_memberships(config)?;
    let sims = population_similarity(config, &memberships, use_covariates)?;
    Ok((memberships, sims))
}
