use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use dyncasc::backtest::{run_backtest, BacktestConfig};
use dyncasc::bench::{run_bench, BenchConfig};
use dyncasc::graph::covariate_weights;
use dyncasc::io;
use dyncasc::lasso::{infer_network, LassoConfig};
use dyncasc::model::{AdjacencySequence, MembershipSequence, NodeIndex};
use dyncasc::sim::{gen_network, SimConfig};
use dyncasc::{par, Bandwidth, CascError, DetectConfig, Method, Result};

#[derive(Parser)]
#[command(name = "dyncasc", version, about = "Dynamic covariate-assisted spectral co-clustering toolkit")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dynamic network with planted communities.
    Simulate(SimulateArgs),
    /// Estimate row and column communities for every period.
    Detect(DetectArgs),
    /// Build rolling lead-lag networks from a return panel.
    Infer(InferArgs),
    /// Community momentum portfolio backtest.
    Backtest(BacktestArgs),
    /// Simulation study comparing the three detection methods.
    Bench(BenchArgs),
}

#[derive(Args)]
struct Common {
    /// JSON config; flags override fields of the same name.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed for every random stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file, or directory for `simulate`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Number of nodes.
    #[arg(long)]
    n: Option<usize>,
    /// Number of periods.
    #[arg(long)]
    t: Option<usize>,
    /// Nodes re-drawn at each period transition.
    #[arg(long)]
    s: Option<usize>,
    /// Row (sending) communities.
    #[arg(long)]
    k_rows: Option<usize>,
    /// Column (receiving) communities.
    #[arg(long)]
    k_cols: Option<usize>,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    common: Common,
    /// Edge list CSV (t,src,dst).
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Covariate CSV (node,cov,value).
    #[arg(long)]
    covariates: Option<PathBuf>,
    /// casc-dyn, casc-static or disim-dc.
    #[arg(long)]
    method: Option<Method>,
    /// Row (sending) communities.
    #[arg(long)]
    k_rows: Option<usize>,
    /// Column (receiving) communities.
    #[arg(long)]
    k_cols: Option<usize>,
    /// Kernel order.
    #[arg(long)]
    ell: Option<usize>,
    /// Integer, `auto` or `auto:<cap>`.
    #[arg(long)]
    bandwidth: Option<Bandwidth>,
    /// k-medians restarts.
    #[arg(long)]
    restarts: Option<usize>,
}

#[derive(Args)]
struct InferArgs {
    #[command(flatten)]
    common: Common,
    /// Return panel CSV (date,symbol,return).
    #[arg(long)]
    returns: Option<PathBuf>,
    /// Regression window in days.
    #[arg(long)]
    window: Option<usize>,
    /// First window end (exclusive day index).
    #[arg(long)]
    start: Option<usize>,
    /// Days between consecutive window ends.
    #[arg(long)]
    step: Option<usize>,
}

#[derive(Args)]
struct BacktestArgs {
    #[command(flatten)]
    common: Common,
    /// Return panel CSV (date,symbol,return).
    #[arg(long)]
    returns: Option<PathBuf>,
    /// Membership CSV (t,node,row_community,col_community).
    #[arg(long)]
    membership: Option<PathBuf>,
    /// Day index of the first membership period.
    #[arg(long)]
    day_offset: Option<usize>,
    /// Days per membership period.
    #[arg(long)]
    period_days: Option<usize>,
    /// Longest holding horizon in days.
    #[arg(long)]
    max_horizon: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Restrict to one method.
    #[arg(long)]
    method: Option<Method>,
    /// Row (sending) communities.
    #[arg(long)]
    k_rows: Option<usize>,
    /// Column (receiving) communities.
    #[arg(long)]
    k_cols: Option<usize>,
    /// Kernel order.
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long)]
    bandwidth: Option<Bandwidth>,
    /// k-medians restarts.
    #[arg(long)]
    restarts: Option<usize>,
    /// Replications per grid cell.
    #[arg(long)]
    replications: Option<usize>,
    /// Comma-separated network sizes.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    /// Comma-separated switching counts.
    #[arg(long, value_delimiter = ',')]
    s_grid: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DetectRun {
    edges: PathBuf,
    covariates: Option<PathBuf>,
    out: PathBuf,
    #[serde(default = "default_method")]
    method: Method,
    k_rows: usize,
    k_cols: usize,
    #[serde(default = "default_ell")]
    ell: usize,
    #[serde(default = "default_bandwidth")]
    bandwidth: Bandwidth,
    #[serde(default = "default_restarts")]
    restarts: usize,
    #[serde(default)]
    seed: u64,
}

fn default_method() -> Method {
    Method::CascDynamic
}

fn default_ell() -> usize {
    4
}

fn default_bandwidth() -> Bandwidth {
    Bandwidth::Auto { cap: None }
}

fn default_restarts() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct InferRun {
    returns: PathBuf,
    out: PathBuf,
    #[serde(flatten)]
    lasso: LassoConfig,
    start: Option<usize>,
    #[serde(default = "default_step")]
    step: usize,
}

fn default_step() -> usize {
    30
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BacktestRun {
    returns: PathBuf,
    membership: PathBuf,
    out: PathBuf,
    #[serde(flatten)]
    backtest: BacktestConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BenchRun {
    out: PathBuf,
    #[serde(flatten)]
    bench: BenchConfig,
}

/// JSON object from `--config` (or empty) with flag overrides applied.
struct Layered(Map<String, Value>);

impl Layered {
    fn load(common: &Common) -> Result<Self> {
        let mut map = match &common.config {
            Some(path) => match io::read_json::<Value>(path)? {
                Value::Object(m) => m,
                _ => return Err(CascError::InvalidInput(format!("{}: config must be a JSON object", path.display()))),
            },
            None => Map::new(),
        };
        if let Some(seed) = common.seed {
            map.insert("seed".into(), seed.into());
        }
        if let Some(out) = &common.out {
            map.insert("out".into(), json(out));
        }
        Ok(Layered(map))
    }

    fn set<T: Serialize>(&mut self, key: &str, value: &Option<T>) {
        if let Some(v) = value {
            self.0.insert(key.into(), json(v));
        }
    }

    fn set_nested<T: Serialize>(&mut self, outer: &str, key: &str, value: &Option<T>) {
        if let Some(v) = value {
            let entry = self.0.entry(outer).or_insert_with(|| Value::Object(Map::new()));
            if let Value::Object(m) = entry {
                m.insert(key.into(), json(v));
            }
        }
    }

    fn require(&self, key: &str) -> Result<()> {
        if self.0.contains_key(key) {
            Ok(())
        } else {
            Err(CascError::InvalidInput(format!("`{key}` is required (flag or config field)")))
        }
    }

    fn parse<T: DeserializeOwned>(self) -> Result<T> {
        serde_json::from_value(Value::Object(self.0)).map_err(|e| CascError::InvalidInput(format!("config: {e}")))
    }
}

fn json<T: Serialize + ?Sized>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn source(path: &Path) -> String {
    path.display().to_string()
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut layered = Layered::load(&args.common)?;
    layered.set("n", &args.n);
    layered.set("t", &args.t);
    layered.set("s", &args.s);
    layered.set("k_rows", &args.k_rows);
    layered.set("k_cols", &args.k_cols);
    layered.require("seed")?;
    layered.require("out")?;
    let out: PathBuf = serde_json::from_value(layered.0.remove("out").expect("checked"))
        .map_err(|e| CascError::InvalidInput(format!("out: {e}")))?;
    let config: SimConfig = layered.parse()?;
    let bundle = gen_network(&config)?;
    if bundle.clipped > 0 {
        log::warn!("{} edge probabilities were clipped to 1", bundle.clipped);
    }
    let nodes = NodeIndex::numbered(config.n);
    let path = out.join("edges.csv");
    io::write_edges(io::create(&path)?, &source(&path), &bundle.adjacency, &nodes)?;
    let path = out.join("covariates.csv");
    io::write_covariates(io::create(&path)?, &source(&path), &bundle.covariates, &nodes)?;
    let path = out.join("membership.csv");
    io::write_membership(io::create(&path)?, &source(&path), &bundle.memberships, &nodes)?;
    let path = out.join("config.json");
    let text = serde_json::to_string_pretty(&config).expect("config serializes") + "\n";
    std::fs::write(&path, text).map_err(|e| CascError::Io {
        path: source(&path),
        message: e.to_string(),
    })?;
    info!("wrote {} periods for {} nodes to {}", config.t, config.n, out.display());
    Ok(())
}

fn detect(args: &DetectArgs) -> Result<()> {
    let mut layered = Layered::load(&args.common)?;
    layered.set("edges", &args.edges);
    layered.set("covariates", &args.covariates);
    layered.set("method", &args.method);
    layered.set("k_rows", &args.k_rows);
    layered.set("k_cols", &args.k_cols);
    layered.set("ell", &args.ell);
    layered.set("bandwidth", &args.bandwidth);
    layered.set("restarts", &args.restarts);
    let run: DetectRun = layered.parse()?;
    let data = io::read_network_files(&run.edges, run.covariates.as_deref())?;
    let config = DetectConfig {
        k_rows: run.k_rows,
        k_cols: run.k_cols,
        ell: run.ell,
        bandwidth: run.bandwidth,
        use_covariates: true,
        restarts: run.restarts,
        seed: run.seed,
    };
    let weights = covariate_weights(&data.covariates);
    let detection = dyncasc::detect_method(run.method, &data.adjacency, &data.covariates, &weights, &config)?;
    info!("bandwidths {:?}", detection.bandwidths);
    info!("alphas {:?}", detection.alphas);
    io::write_membership(io::create(&run.out)?, &source(&run.out), &detection.memberships, &data.nodes)
}

fn infer(args: &InferArgs) -> Result<()> {
    let mut layered = Layered::load(&args.common)?;
    layered.set("returns", &args.returns);
    layered.set("window", &args.window);
    layered.set("start", &args.start);
    layered.set("step", &args.step);
    let run: InferRun = layered.parse()?;
    let panel = io::read_returns(io::open(&run.returns)?, &source(&run.returns))?;
    let start = run.start.unwrap_or(run.lasso.window + 1);
    if run.step == 0 {
        return Err(CascError::InvalidInput("step must be positive".into()));
    }
    let ends: Vec<usize> = (start..=panel.n_days()).step_by(run.step).collect();
    if ends.is_empty() {
        return Err(CascError::InsufficientHistory {
            t: panel.n_days(),
            r: start,
        });
    }
    let mats = ends
        .iter()
        .map(|&t_end| {
            let a = infer_network(&panel, &run.lasso, t_end)?;
            info!("window ending before {}: {} edges", panel.dates().get(t_end).map_or("end", String::as_str), a.n_edges());
            Ok(a)
        })
        .collect::<Result<Vec<_>>>()?;
    let adjacency = AdjacencySequence::new(panel.n_assets(), mats)?;
    let nodes = NodeIndex::new(panel.symbols().iter().cloned())?;
    io::write_edges(io::create(&run.out)?, &source(&run.out), &adjacency, &nodes)
}

/// Labels for every panel asset. Assets absent from the membership file get
/// their own singleton community, which keeps them out of the sort.
fn align_membership(membership: &MembershipSequence, nodes: &NodeIndex, symbols: &[String]) -> Result<MembershipSequence> {
    let ids: Vec<Option<usize>> = symbols.iter().map(|s| nodes.id(s)).collect();
    let missing = ids.iter().filter(|i| i.is_none()).count();
    if missing == symbols.len() {
        return Err(CascError::InvalidInput("no panel symbol appears in the membership file".into()));
    }
    let side = |t: usize, rows: bool, k: usize| -> Vec<usize> {
        let mut extra = k;
        ids.iter()
            .map(|id| match id {
                Some(i) => membership.side(t, rows)[*i],
                None => {
                    extra += 1;
                    extra - 1
                }
            })
            .collect()
    };
    let (kr, kc) = (membership.k_rows(), membership.k_cols());
    let t = membership.n_periods();
    MembershipSequence::new_relaxed(
        kr + missing,
        kc + missing,
        (0..t).map(|p| side(p, true, kr)).collect(),
        (0..t).map(|p| side(p, false, kc)).collect(),
    )
}

fn backtest(args: &BacktestArgs) -> Result<()> {
    let mut layered = Layered::load(&args.common)?;
    layered.set("returns", &args.returns);
    layered.set("membership", &args.membership);
    layered.set("day_offset", &args.day_offset);
    layered.set("period_days", &args.period_days);
    layered.set("max_horizon", &args.max_horizon);
    let run: BacktestRun = layered.parse()?;
    let panel = io::read_returns(io::open(&run.returns)?, &source(&run.returns))?;
    let mut nodes = NodeIndex::default();
    let membership = io::read_membership(io::open(&run.membership)?, &source(&run.membership), &mut nodes)?;
    let membership = align_membership(&membership, &nodes, panel.symbols())?;
    let result = run_backtest(&panel, &membership, &run.backtest)?;
    if let Some(h1) = result.horizon(1) {
        info!("h=1 long-short mean {:.6}, t = {:?}", h1.mean_long_short, h1.nw_t);
    }
    io::write_backtest(io::create(&run.out)?, &source(&run.out), &result)
}

fn bench(args: &BenchArgs) -> Result<()> {
    let mut layered = Layered::load(&args.common)?;
    layered.set("ell", &args.ell);
    layered.set("bandwidth", &args.bandwidth);
    layered.set("restarts", &args.restarts);
    layered.set("replications", &args.replications);
    layered.set("n_grid", &args.n_grid);
    layered.set("s_grid", &args.s_grid);
    layered.set("methods", &args.method.map(|m| vec![m]));
    layered.set_nested("sim", "k_rows", &args.k_rows);
    layered.set_nested("sim", "k_cols", &args.k_cols);
    layered.require("seed")?;
    layered.require("out")?;
    let run: BenchRun = layered.parse()?;
    if let Some((&n, &s)) = run
        .bench
        .n_grid
        .iter()
        .flat_map(|n| run.bench.s_grid.iter().map(move |s| (n, s)))
        .find(|(n, s)| s > n)
    {
        return Err(CascError::InfeasibleConfig(format!("s = {s} exceeds N = {n}")));
    }
    let records = run_bench(&run.bench)?;
    io::write_bench(io::create(&run.out)?, &source(&run.out), &records)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Detect(a) => detect(a),
        Command::Infer(a) => infer(a),
        Command::Backtest(a) => backtest(a),
        Command::Bench(a) => bench(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    let result = match cli.threads {
        Some(n) if n > 0 => par::with_threads(n, || run(&cli)),
        _ => run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}
