//! Simulation-study runner: sweeps network size or switching count, draws
//! seeded replications and scores every method against the planted truth.

use serde::{Deserialize, Serialize};

use crate::cluster::{detect_method, Bandwidth, DetectConfig, Method};
use crate::error::Result;
use crate::eval::miscluster_sequence;
use crate::graph::covariate_weights;
use crate::par;
use crate::rng::{self, tag};
use crate::sim::{gen_network, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub n_grid: Vec<usize>,
    pub s_grid: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub ell: usize,
    pub bandwidth: Bandwidth,
    pub restarts: usize,
    pub methods: Vec<Method>,
    /// Template for everything not swept (T, K, B_base, laws).
    pub sim: SimConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n_grid: (1..=10).map(|i| 20 * i).collect(),
            s_grid: vec![10],
            replications: 1000,
            seed: 0,
            ell: 4,
            bandwidth: Bandwidth::Auto { cap: None },
            restarts: 10,
            methods: Method::ALL.to_vec(),
            sim: SimConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub method: Method,
    pub n: usize,
    pub s: usize,
    pub replication: usize,
    pub row_rate: f64,
    pub col_rate: f64,
}

/// Runs every `(n, s, replication)` cell. Records come back ordered by `n`,
/// then `s`, replication and method, whatever the thread count.
pub fn run_bench(config: &BenchConfig) -> Result<Vec<BenchRecord>> {
    let cells: Vec<(usize, usize, usize)> = config
        .n_grid
        .iter()
        .flat_map(|&n| config.s_grid.iter().flat_map(move |&s| (0..config.replications).map(move |r| (n, s, r))))
        .collect();
    let per_cell = par::try_map_range(cells.len(), |idx| {
        let (n, s, replication) = cells[idx];
        run_cell(config, n, s, replication)
    })?;
    Ok(per_cell.into_iter().flatten().collect())
}

fn run_cell(config: &BenchConfig, n: usize, s: usize, replication: usize) -> Result<Vec<BenchRecord>> {
    let sim = SimConfig {
        n,
        s,
        seed: rng::derive_seed(config.seed, &[tag::BENCH, n as u64, s as u64, replication as u64]),
        ..config.sim.clone()
    };
    let bundle = gen_network(&sim)?;
    let weights = covariate_weights(&bundle.covariates);
    let detect = DetectConfig {
        k_rows: sim.k_rows,
        k_cols: sim.k_cols,
        ell: config.ell,
        bandwidth: config.bandwidth,
        use_covariates: true,
        restarts: config.restarts,
        seed: rng::derive_seed(sim.seed, &[tag::DETECT]),
    };
    config
        .methods
        .iter()
        .map(|&method| {
            let est = detect_method(method, &bundle.adjacency, &bundle.covariates, &weights, &detect)?;
            let report = miscluster_sequence(&est.memberships, &bundle.memberships)?;
            Ok(BenchRecord {
                method,
                n,
                s,
                replication,
                row_rate: report.row_mean,
                col_rate: report.col_mean,
            })
        })
        .collect()
}

/// Mean row and column rates of `method` over the records matching `(n, s)`.
pub fn mean_rates(records: &[BenchRecord], method: Method, n: usize, s: usize) -> Option<(f64, f64)> {
    let hits: Vec<&BenchRecord> = records.iter().filter(|r| r.method == method && r.n == n && r.s == s).collect();
    if hits.is_empty() {
        return None;
    }
    let m = hits.len() as f64;
    Some((
        hits.iter().map(|r| r.row_rate).sum::<f64>() / m,
        hits.iter().map(|r| r.col_rate).sum::<f64>() / m,
    ))
}
