use std::path::Path;
use std::process::{Command, Output};

use dyncasc::backtest::{planted_spillover, static_membership};
use dyncasc::io;
use dyncasc::model::NodeIndex;
use tempfile::TempDir;

fn dyncasc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyncasc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = dyncasc(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["simulate", "--seed", "11", "--n", "30", "--t", "3", "--s", "5", "--out", p(out)]);
    }
    for f in ["edges.csv", "covariates.csv", "membership.csv", "config.json"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f}");
    }
    let edges = String::from_utf8(read(&a.join("edges.csv"))).unwrap();
    assert!(edges.starts_with("t,src,dst\n"));
    let membership = String::from_utf8(read(&a.join("membership.csv"))).unwrap();
    assert_eq!(membership.lines().count(), 1 + 30 * 3);
}

#[test]
fn simulate_reports_infeasible_config() {
    let dir = TempDir::new().unwrap();
    let out = dyncasc(&["simulate", "--seed", "1", "--n", "20", "--s", "30", "--out", p(dir.path())]);
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error[E_INFEASIBLE_CONFIG]"), "{}", stderr(&out));
}

#[test]
fn simulate_requires_seed() {
    let dir = TempDir::new().unwrap();
    let out = dyncasc(&["simulate", "--out", p(dir.path())]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("error[E_INVALID_INPUT]"));
    assert!(stderr(&out).contains("seed"));
}

#[test]
fn detect_writes_membership_for_every_node() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--seed", "5", "--n", "40", "--t", "4", "--s", "4", "--out", p(&sim)]);
    let est = dir.path().join("est.csv");
    for method in ["casc-dyn", "casc-static", "disim-dc"] {
        ok(&[
            "detect",
            "--edges",
            p(&sim.join("edges.csv")),
            "--covariates",
            p(&sim.join("covariates.csv")),
            "--method",
            method,
            "--k-rows",
            "4",
            "--k-cols",
            "4",
            "--bandwidth",
            "auto",
            "--restarts",
            "3",
            "--seed",
            "2",
            "--out",
            p(&est),
        ]);
        let mut nodes = NodeIndex::default();
        let m = io::read_membership(io::open(&est).unwrap(), "est", &mut nodes).unwrap();
        assert_eq!((m.n_periods(), m.n_nodes()), (4, 40));
        assert!(m.rows(0).iter().all(|&l| l < 4));
    }
}

#[test]
fn detect_reads_json_config_and_flags_override() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--seed", "6", "--n", "30", "--t", "2", "--s", "3", "--out", p(&sim)]);
    let cfg = dir.path().join("detect.json");
    let body = serde_json::json!({
        "edges": sim.join("edges.csv"),
        "covariates": sim.join("covariates.csv"),
        "out": dir.path().join("from_json.csv"),
        "k_rows": 4,
        "k_cols": 4,
        "bandwidth": {"fixed": 1},
        "restarts": 2
    });
    std::fs::write(&cfg, body.to_string()).unwrap();
    ok(&["detect", "--config", p(&cfg)]);
    assert!(dir.path().join("from_json.csv").exists());
    let flagged = dir.path().join("flagged.csv");
    ok(&["detect", "--config", p(&cfg), "--k-cols", "2", "--out", p(&flagged)]);
    let mut nodes = NodeIndex::default();
    let m = io::read_membership(io::open(&flagged).unwrap(), "f", &mut nodes).unwrap();
    assert!(m.cols(0).iter().all(|&l| l < 2));
}

#[test]
fn malformed_input_names_file_and_line() {
    let dir = TempDir::new().unwrap();
    let edges = dir.path().join("edges.csv");
    std::fs::write(&edges, "t,src,dst\n0,a,b\n0,b,c\nzero,c,a\n").unwrap();
    let out = dyncasc(&[
        "detect", "--edges", p(&edges), "--k-rows", "2", "--k-cols", "2", "--out", p(&dir.path().join("m.csv")),
    ]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.starts_with("error[E_FORMAT]"), "{err}");
    assert!(err.contains(&format!("{}:4:", edges.display())), "{err}");

    let out = dyncasc(&["detect", "--edges", p(&dir.path().join("missing.csv")), "--k-rows", "2", "--k-cols", "2", "--out", "x"]);
    assert!(stderr(&out).starts_with("error[E_IO]"));
}

#[test]
fn bench_is_deterministic_across_runs_and_threads() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bench.json");
    std::fs::write(&cfg, r#"{"replications": 1, "sim": {"t": 3}, "restarts": 2}"#).unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        ok(&[
            "bench", "--config", p(&cfg), "--seed", "9", "--replications", "2", "--n-grid", "20,30", "--s-grid", "4",
            "--threads", threads, "--out", p(&out),
        ]);
        read(&out)
    };
    let first = run("a.csv", "1");
    assert_eq!(first, run("b.csv", "1"));
    assert_eq!(first, run("c.csv", "4"));
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("method,n,s,replication,row_rate,col_rate\n"));
    // 2 sizes x 2 replications x 3 methods
    assert_eq!(text.lines().count(), 1 + 12);
}

#[test]
fn bench_rejects_switching_count_above_size() {
    let dir = TempDir::new().unwrap();
    let out = dyncasc(&["bench", "--seed", "1", "--n-grid", "20", "--s-grid", "50", "--out", p(&dir.path().join("b.csv"))]);
    assert!(stderr(&out).starts_with("error[E_INFEASIBLE_CONFIG]"));
}

#[test]
fn infer_then_backtest() {
    let dir = TempDir::new().unwrap();
    let mut rng = dyncasc::rng::stream(3, &[]);
    let (panel, labels) = planted_spillover(12, 160, 3, 0.5, &mut rng);
    let returns = dir.path().join("returns.csv");
    io::write_returns(io::create(&returns).unwrap(), "r", &panel).unwrap();

    let edges = dir.path().join("net.csv");
    ok(&["infer", "--returns", p(&returns), "--window", "60", "--step", "50", "--out", p(&edges)]);
    let mut nodes = NodeIndex::default();
    let periods = io::read_edges(io::open(&edges).unwrap(), "net", &mut nodes).unwrap();
    assert!(periods.len() <= 2);

    let membership = dir.path().join("membership.csv");
    let symbols = NodeIndex::new(panel.symbols().iter().cloned()).unwrap();
    io::write_membership(io::create(&membership).unwrap(), "m", &static_membership(&labels).unwrap(), &symbols).unwrap();
    let table = dir.path().join("table.csv");
    ok(&["backtest", "--returns", p(&returns), "--membership", p(&membership), "--max-horizon", "3", "--out", p(&table)]);
    let text = String::from_utf8(read(&table)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("horizon,quartile_1,quartile_2,quartile_3,quartile_4,long_short,nw_t,days"));
    assert_eq!(lines.count(), 3);
}
