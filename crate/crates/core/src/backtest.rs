//! Community momentum portfolios: sort assets on the same-day average return
//! of their community peers, go long the top quartile and short the bottom
//! one, and track the spread over the following days.

use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{CascError, Result};
use crate::model::{MembershipSequence, ReturnPanel};
use crate::par;
use crate::rng::StreamRng;

pub const QUARTILES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestConfig {
    /// Largest holding offset `h`; offsets `1..=max_horizon` are tracked.
    pub max_horizon: usize,
    /// First formation day, paired with membership period 0.
    pub day_offset: usize,
    /// Days covered by each membership period. Days past the last period
    /// keep using the last one.
    pub period_days: usize,
    /// Sort on sending (row) communities instead of receiving (column) ones.
    pub use_rows: bool,
    pub nw_lags: usize,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig {
            max_horizon: 7,
            day_offset: 0,
            period_days: 1,
            use_rows: false,
            nw_lags: 4,
        }
    }
}

/// Mean of same-community peers' returns on `day`. `None` for assets whose
/// community has no other member with a valid return.
pub fn momentum_signal(panel: &ReturnPanel, labels: &[usize], day: usize) -> Vec<Option<f64>> {
    let n = panel.n_assets();
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sums = vec![NeumaierSum::default(); k];
    let mut counts = vec![0usize; k];
    for j in 0..n {
        if let Some(r) = panel.get(day, j) {
            sums[labels[j]].add(r);
            counts[labels[j]] += 1;
        }
    }
    (0..n)
        .map(|i| {
            let c = labels[i];
            let (mut sum, mut count) = (sums[c].clone(), counts[c]);
            if let Some(r) = panel.get(day, i) {
                sum.add(-r);
                count -= 1;
            }
            (count > 0).then(|| sum.total() / count as f64)
        })
        .collect()
}

/// Quartile of each eligible asset: `floor(4 * rank / n_eligible)` with
/// 0-based ascending ranks and ties broken by asset index. Quartile 0 is the
/// loser leg and quartile 3 the winner leg.
pub fn form_portfolio(signals: &[Option<f64>]) -> Result<Vec<Option<usize>>> {
    let mut order: Vec<(usize, f64)> = signals.iter().enumerate().filter_map(|(i, s)| s.map(|v| (i, v))).collect();
    let m = order.len();
    if m < QUARTILES {
        return Err(CascError::TooFewAssets { needed: QUARTILES, found: m });
    }
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut out = vec![None; signals.len()];
    for (rank, (i, _)) in order.into_iter().enumerate() {
        out[i] = Some((QUARTILES * rank / m).min(QUARTILES - 1));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonResult {
    pub h: usize,
    /// Formation days that produced a return at this offset.
    pub days: Vec<usize>,
    /// Equal-weight quartile returns, `quartiles[q][k]` for `days[k]`.
    pub quartiles: [Vec<f64>; QUARTILES],
    /// Winner minus loser.
    pub long_short: Vec<f64>,
    pub mean_quartiles: [f64; QUARTILES],
    pub mean_long_short: f64,
    /// Newey-West t-statistic of the long-short mean; `None` when the
    /// series is too short or has zero variance.
    pub nw_t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioResult {
    pub formation_days: Vec<usize>,
    /// Candidate days dropped because fewer than four assets had a signal.
    pub skipped_days: Vec<usize>,
    /// Leg sizes on each formation day.
    pub leg_sizes: Vec<[usize; QUARTILES]>,
    pub horizons: Vec<HorizonResult>,
}

impl PortfolioResult {
    pub fn horizon(&self, h: usize) -> Option<&HorizonResult> {
        self.horizons.iter().find(|r| r.h == h)
    }
}

/// Days that can be formation days: membership exists and every offset up
/// to `max_horizon` is inside the panel.
pub fn candidate_days(panel: &ReturnPanel, config: &BacktestConfig) -> Vec<usize> {
    let last = panel.n_days().saturating_sub(config.max_horizon);
    (config.day_offset..last).collect()
}

fn validate(panel: &ReturnPanel, membership: &MembershipSequence, config: &BacktestConfig) -> Result<()> {
    if membership.n_nodes() != panel.n_assets() {
        return Err(CascError::DimensionMismatch(format!(
            "membership covers {} nodes but the panel has {} assets",
            membership.n_nodes(),
            panel.n_assets()
        )));
    }
    if config.max_horizon == 0 || config.period_days == 0 || membership.n_periods() == 0 {
        return Err(CascError::InvalidInput("horizon, period length and membership must be non-empty".into()));
    }
    Ok(())
}

struct DayOutcome {
    day: usize,
    sizes: [usize; QUARTILES],
    /// Per offset, the quartile returns if every leg had a valid return.
    legs: Vec<Option<[f64; QUARTILES]>>,
}

fn form_day(panel: &ReturnPanel, membership: &MembershipSequence, config: &BacktestConfig, day: usize) -> Result<DayOutcome> {
    let period = ((day - config.day_offset) / config.period_days).min(membership.n_periods() - 1);
    let labels = membership.side(period, config.use_rows);
    let quartile = form_portfolio(&momentum_signal(panel, labels, day))?;
    let mut sizes = [0; QUARTILES];
    for q in quartile.iter().flatten() {
        sizes[*q] += 1;
    }
    let legs = (1..=config.max_horizon)
        .map(|h| {
            let mut sums = vec![NeumaierSum::default(); QUARTILES];
            let mut counts = [0usize; QUARTILES];
            for (i, q) in quartile.iter().enumerate() {
                if let (Some(q), Some(r)) = (q, panel.get(day + h, i)) {
                    sums[*q].add(r);
                    counts[*q] += 1;
                }
            }
            if counts.contains(&0) {
                return None;
            }
            Some(std::array::from_fn(|q| sums[q].total() / counts[q] as f64))
        })
        .collect();
    Ok(DayOutcome { day, sizes, legs })
}

/// Backtest over the given formation days.
pub fn run_backtest_on_days(
    panel: &ReturnPanel,
    membership: &MembershipSequence,
    config: &BacktestConfig,
    days: &[usize],
) -> Result<PortfolioResult> {
    validate(panel, membership, config)?;
    if let Some(&bad) = days
        .iter()
        .find(|&&d| d < config.day_offset || d + config.max_horizon >= panel.n_days())
    {
        return Err(CascError::InsufficientFuture {
            day: bad,
            horizon: config.max_horizon,
            len: panel.n_days(),
        });
    }
    let outcomes = par::map_slice(days, |&d| form_day(panel, membership, config, d));
    let mut formed = Vec::new();
    let mut skipped_days = Vec::new();
    for (day, outcome) in days.iter().zip(outcomes) {
        match outcome {
            Ok(o) => formed.push(o),
            Err(CascError::TooFewAssets { .. }) => skipped_days.push(*day),
            Err(e) => return Err(e),
        }
    }
    if formed.is_empty() {
        return Err(CascError::TooFewAssets {
            needed: QUARTILES,
            found: 0,
        });
    }
    let horizons = (1..=config.max_horizon)
        .map(|h| {
            let mut res = HorizonResult {
                h,
                days: Vec::new(),
                quartiles: Default::default(),
                long_short: Vec::new(),
                mean_quartiles: [f64::NAN; QUARTILES],
                mean_long_short: f64::NAN,
                nw_t: None,
            };
            for o in &formed {
                if let Some(legs) = o.legs[h - 1] {
                    res.days.push(o.day);
                    for q in 0..QUARTILES {
                        res.quartiles[q].push(legs[q]);
                    }
                    res.long_short.push(legs[QUARTILES - 1] - legs[0]);
                }
            }
            if !res.days.is_empty() {
                res.mean_quartiles = std::array::from_fn(|q| compensated_mean(&res.quartiles[q]));
                res.mean_long_short = compensated_mean(&res.long_short);
                res.nw_t = newey_west_tstat(&res.long_short, config.nw_lags).ok();
            }
            res
        })
        .collect();
    Ok(PortfolioResult {
        formation_days: formed.iter().map(|o| o.day).collect(),
        skipped_days,
        leg_sizes: formed.iter().map(|o| o.sizes).collect(),
        horizons,
    })
}

/// Backtest over every candidate formation day.
pub fn run_backtest(panel: &ReturnPanel, membership: &MembershipSequence, config: &BacktestConfig) -> Result<PortfolioResult> {
    run_backtest_on_days(panel, membership, config, &candidate_days(panel, config))
}

/// Splits candidate formation days at the median of `indicator` (indexed by
/// day; `<=` median is low) and backtests each half.
pub fn split_by_regime(
    panel: &ReturnPanel,
    membership: &MembershipSequence,
    config: &BacktestConfig,
    indicator: &[f64],
) -> (Result<PortfolioResult>, Result<PortfolioResult>) {
    if indicator.len() != panel.n_days() {
        let err = || {
            CascError::DimensionMismatch(format!(
                "indicator has {} values for {} days",
                indicator.len(),
                panel.n_days()
            ))
        };
        return (Err(err()), Err(err()));
    }
    let days = candidate_days(panel, config);
    let mut values: Vec<f64> = days.iter().map(|&d| indicator[d]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        let err = || CascError::InvalidInput("indicator must be finite on formation days".into());
        return (Err(err()), Err(err()));
    }
    values.sort_by(f64::total_cmp);
    let median = match values.len() {
        0 => f64::NAN,
        m if m % 2 == 1 => values[m / 2],
        m => 0.5 * (values[m / 2 - 1] + values[m / 2]),
    };
    let (low, high): (Vec<usize>, Vec<usize>) = days.iter().partition(|&&d| indicator[d] <= median);
    (
        run_backtest_on_days(panel, membership, config, &low),
        run_backtest_on_days(panel, membership, config, &high),
    )
}

/// `mean / sqrt(lrv / n)` with the Bartlett-weighted long-run variance
/// `γ0 + 2 Σ_{l=1..lags} (1 − l/(lags+1)) γl`.
pub fn newey_west_tstat(series: &[f64], lags: usize) -> Result<f64> {
    let n = series.len();
    if n < lags + 2 {
        return Err(CascError::InvalidInput(format!(
            "series of length {n} is too short for {lags} lags"
        )));
    }
    let mean = compensated_mean(series);
    let nf = n as f64;
    let gamma = |l: usize| (l..n).map(|i| (series[i] - mean) * (series[i - l] - mean)).sum::<f64>() / nf;
    let g0 = gamma(0);
    if g0 <= 0.0 {
        return Err(CascError::DegenerateSeries("series has zero variance".into()));
    }
    let lrv = g0
        + 2.0
            * (1..=lags)
                .map(|l| (1.0 - l as f64 / (lags + 1) as f64) * gamma(l))
                .sum::<f64>();
    if !(lrv > 0.0) {
        return Err(CascError::DegenerateSeries("long-run variance is not positive".into()));
    }
    Ok(mean / (lrv / nf).sqrt())
}

#[derive(Debug, Clone, Default)]
struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

fn compensated_mean(xs: &[f64]) -> f64 {
    let mut s = NeumaierSum::default();
    for &x in xs {
        s.add(x);
    }
    s.total() / xs.len() as f64
}

/// Synthetic panel with community spillover: each of `k` equal communities
/// draws a shock `f` per day and member returns are
/// `f(t) + loading * f(t-1) + noise`. `loading = 0` gives a panel with
/// no cross-day structure. Communities are contiguous blocks of assets.
pub fn planted_spillover(n: usize, days: usize, k: usize, loading: f64, rng: &mut StreamRng) -> (ReturnPanel, Vec<usize>) {
    let labels: Vec<usize> = (0..n).map(|i| i * k / n).collect();
    let shock = Normal::new(0.0, 0.01).expect("valid sd");
    let noise = Normal::new(0.0, 0.01).expect("valid sd");
    let f = DMatrix::from_fn(days + 1, k, |_, _| shock.sample(rng));
    let returns = DMatrix::from_fn(days, n, |d, i| {
        let c = labels[i];
        f[(d + 1, c)] + loading * f[(d, c)] + noise.sample(rng)
    });
    (ReturnPanel::from_matrix(returns).expect("finite returns"), labels)
}

/// Membership with the same labels on both sides for one period.
pub fn static_membership(labels: &[usize]) -> Result<MembershipSequence> {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    MembershipSequence::new_relaxed(k, k, vec![labels.to_vec()], vec![labels.to_vec()])
}
