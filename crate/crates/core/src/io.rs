//! Long-format CSV readers and writers, plus JSON config loading.
//!
//! Readers take any `Read` plus a source name for error messages.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::backtest::PortfolioResult;
use crate::bench::BenchRecord;
use crate::error::{CascError, Result};
use crate::model::{AdjacencySequence, CovariateMatrix, MembershipSequence, NodeIndex, ReturnPanel, SparseBinary};

pub const EDGE_HEADER: [&str; 3] = ["t", "src", "dst"];
pub const COVARIATE_HEADER: [&str; 3] = ["node", "cov", "value"];
pub const MEMBERSHIP_HEADER: [&str; 4] = ["t", "node", "row_community", "col_community"];
pub const RETURN_HEADER: [&str; 3] = ["date", "symbol", "return"];
pub const BENCH_HEADER: [&str; 6] = ["method", "n", "s", "replication", "row_rate", "col_rate"];
pub const BACKTEST_HEADER: [&str; 8] = [
    "horizon",
    "quartile_1",
    "quartile_2",
    "quartile_3",
    "quartile_4",
    "long_short",
    "nw_t",
    "days",
];

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CascError::io(path, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CascError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CascError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| CascError::Format {
        path: path.display().to_string(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

fn format_err(source: &str, line: u64, message: impl Into<String>) -> CascError {
    CascError::Format {
        path: source.to_string(),
        line,
        message: message.into(),
    }
}

fn csv_err(source: &str, err: csv::Error) -> CascError {
    let line = err.position().map_or(0, |p| p.line());
    match err.kind() {
        csv::ErrorKind::Io(_) => CascError::Io {
            path: source.to_string(),
            message: err.to_string(),
        },
        _ => format_err(source, line, err.to_string()),
    }
}

fn write_err(source: &str, err: impl std::fmt::Display) -> CascError {
    CascError::Io {
        path: source.to_string(),
        message: err.to_string(),
    }
}

/// Reads rows of `T`, checking the header. Yields `(line, row)`.
fn read_rows<R: Read, T: DeserializeOwned>(reader: R, source: &str, header: &[&str]) -> Result<Vec<(u64, T)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let found = rdr.headers().map_err(|e| csv_err(source, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(format_err(
            source,
            1,
            format!("expected header `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(source, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: T = rec.deserialize(Some(&found)).map_err(|e| format_err(source, line, e.to_string()))?;
        out.push((line, row));
    }
    Ok(out)
}

fn writer<W: Write>(w: W, header: &[&str], source: &str) -> Result<csv::Writer<W>> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(header).map_err(|e| write_err(source, e))?;
    Ok(wtr)
}

fn finish<W: Write>(mut wtr: csv::Writer<W>, source: &str) -> Result<()> {
    wtr.flush().map_err(|e| write_err(source, e))
}

#[derive(Deserialize)]
struct EdgeRow {
    t: usize,
    src: String,
    dst: String,
}

/// Per-period edge lists with node ids assigned through `nodes`.
pub fn read_edges<R: Read>(reader: R, source: &str, nodes: &mut NodeIndex) -> Result<Vec<Vec<(usize, usize)>>> {
    let mut periods: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut seen = HashSet::new();
    for (line, row) in read_rows::<_, EdgeRow>(reader, source, &EDGE_HEADER)? {
        if row.src == row.dst {
            return Err(format_err(source, line, format!("self-loop on {}", row.src)));
        }
        let (i, j) = (nodes.get_or_insert(&row.src), nodes.get_or_insert(&row.dst));
        if periods.len() <= row.t {
            periods.resize_with(row.t + 1, Vec::new);
        }
        if !seen.insert((row.t, i, j)) {
            return Err(format_err(source, line, format!("duplicate edge {} -> {} at t = {}", row.src, row.dst, row.t)));
        }
        periods[row.t].push((i, j));
    }
    Ok(periods)
}

/// Builds the adjacency sequence once every node is known. `n_periods`
/// pads trailing edgeless periods.
pub fn edges_to_adjacency(periods: Vec<Vec<(usize, usize)>>, n: usize, n_periods: Option<usize>) -> Result<AdjacencySequence> {
    let t = n_periods.unwrap_or(periods.len()).max(periods.len());
    let mut mats = periods
        .into_iter()
        .map(|edges| SparseBinary::from_edges(n, edges))
        .collect::<Result<Vec<_>>>()?;
    mats.resize_with(t, || SparseBinary::empty(n));
    AdjacencySequence::new(n, mats)
}

pub fn write_edges<W: Write>(w: W, source: &str, adjacency: &AdjacencySequence, nodes: &NodeIndex) -> Result<()> {
    let mut wtr = writer(w, &EDGE_HEADER, source)?;
    for (t, a) in adjacency.mats().iter().enumerate() {
        for (i, j) in a.edges() {
            wtr.write_record([t.to_string().as_str(), nodes.label(i), nodes.label(j)])
                .map_err(|e| write_err(source, e))?;
        }
    }
    finish(wtr, source)
}

#[derive(Deserialize)]
struct CovariateRow {
    node: String,
    cov: usize,
    value: f64,
}

/// Sparse `(node, covariate, value)` triplets.
pub fn read_covariates<R: Read>(reader: R, source: &str, nodes: &mut NodeIndex) -> Result<Vec<(usize, usize, f64)>> {
    let mut out: Vec<(usize, usize, f64)> = Vec::new();
    let mut seen = HashSet::new();
    for (line, row) in read_rows::<_, CovariateRow>(reader, source, &COVARIATE_HEADER)? {
        if !row.value.is_finite() {
            return Err(format_err(source, line, "non-finite covariate value"));
        }
        let i = nodes.get_or_insert(&row.node);
        if !seen.insert((i, row.cov)) {
            return Err(format_err(source, line, format!("duplicate entry for {} covariate {}", row.node, row.cov)));
        }
        out.push((i, row.cov, row.value));
    }
    Ok(out)
}

/// Dense `n x R` matrix with `R = max(cov) + 1` (or `n_covariates`).
pub fn covariates_to_matrix(triplets: &[(usize, usize, f64)], n: usize, n_covariates: Option<usize>) -> Result<CovariateMatrix> {
    let r = triplets
        .iter()
        .map(|&(_, c, _)| c + 1)
        .max()
        .unwrap_or(1)
        .max(n_covariates.unwrap_or(1));
    let mut x = DMatrix::zeros(n, r);
    for &(i, c, v) in triplets {
        x[(i, c)] = v;
    }
    CovariateMatrix::new(x)
}

pub fn write_covariates<W: Write>(w: W, source: &str, covariates: &CovariateMatrix, nodes: &NodeIndex) -> Result<()> {
    let mut wtr = writer(w, &COVARIATE_HEADER, source)?;
    let x = covariates.matrix();
    for i in 0..x.nrows() {
        // an all-zero row still gets one entry so the node survives a re-read
        let row_is_zero = x.row(i).iter().all(|&v| v == 0.0);
        for c in 0..x.ncols() {
            if x[(i, c)] != 0.0 || (row_is_zero && c == 0) {
                wtr.write_record([nodes.label(i), &c.to_string(), &x[(i, c)].to_string()])
                    .map_err(|e| write_err(source, e))?;
            }
        }
    }
    finish(wtr, source)
}

/// A directed network read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkData {
    pub nodes: NodeIndex,
    pub adjacency: AdjacencySequence,
    pub covariates: CovariateMatrix,
}

/// Reads covariates first (so they fix the node order), then edges. Without
/// a covariate file every node gets a single zero covariate.
pub fn read_network_files(edges: &Path, covariates: Option<&Path>) -> Result<NetworkData> {
    let mut nodes = NodeIndex::default();
    let triplets = match covariates {
        Some(p) => read_covariates(open(p)?, &p.display().to_string(), &mut nodes)?,
        None => Vec::new(),
    };
    let periods = read_edges(open(edges)?, &edges.display().to_string(), &mut nodes)?;
    let n = nodes.len();
    Ok(NetworkData {
        adjacency: edges_to_adjacency(periods, n, None)?,
        covariates: covariates_to_matrix(&triplets, n, None)?,
        nodes,
    })
}

#[derive(Deserialize)]
struct MembershipRow {
    t: usize,
    node: String,
    row_community: usize,
    col_community: usize,
}

/// Membership labels. Unseen node labels are added to `nodes`; every node
/// in `nodes` must be labelled in every period. Community counts are taken
/// from the largest label on each side.
pub fn read_membership<R: Read>(reader: R, source: &str, nodes: &mut NodeIndex) -> Result<MembershipSequence> {
    let mut rows: Vec<Vec<Option<usize>>> = Vec::new();
    let mut cols: Vec<Vec<Option<usize>>> = Vec::new();
    for (line, row) in read_rows::<_, MembershipRow>(reader, source, &MEMBERSHIP_HEADER)? {
        let i = nodes.get_or_insert(&row.node);
        if rows.len() <= row.t {
            rows.resize_with(row.t + 1, Vec::new);
            cols.resize_with(row.t + 1, Vec::new);
        }
        for side in [&mut rows[row.t], &mut cols[row.t]] {
            if side.len() <= i {
                side.resize(i + 1, None);
            }
        }
        if rows[row.t][i].is_some() {
            return Err(format_err(source, line, format!("duplicate entry for {} at t = {}", row.node, row.t)));
        }
        rows[row.t][i] = Some(row.row_community);
        cols[row.t][i] = Some(row.col_community);
    }
    let n = nodes.len();
    let complete = |side: Vec<Vec<Option<usize>>>| -> Result<Vec<Vec<usize>>> {
        side.into_iter()
            .enumerate()
            .map(|(t, mut labels)| {
                labels.resize(n, None);
                labels
                    .into_iter()
                    .enumerate()
                    .map(|(i, l)| {
                        l.ok_or_else(|| format_err(source, 0, format!("no label for {} at t = {t}", nodes.label(i))))
                    })
                    .collect()
            })
            .collect()
    };
    let (rows, cols) = (complete(rows)?, complete(cols)?);
    let k = |side: &[Vec<usize>]| side.iter().flatten().max().map_or(1, |m| m + 1);
    MembershipSequence::new_relaxed(k(&rows), k(&cols), rows, cols)
}

pub fn write_membership<W: Write>(w: W, source: &str, membership: &MembershipSequence, nodes: &NodeIndex) -> Result<()> {
    let mut wtr = writer(w, &MEMBERSHIP_HEADER, source)?;
    for t in 0..membership.n_periods() {
        for i in 0..membership.n_nodes() {
            wtr.write_record([
                t.to_string().as_str(),
                nodes.label(i),
                &membership.rows(t)[i].to_string(),
                &membership.cols(t)[i].to_string(),
            ])
            .map_err(|e| write_err(source, e))?;
        }
    }
    finish(wtr, source)
}

#[derive(Deserialize)]
struct ReturnRow {
    date: String,
    symbol: String,
    #[serde(rename = "return")]
    value: f64,
}

/// Long-format returns. Dates are ordered lexicographically, which is
/// chronological for ISO-8601; symbols keep first-appearance order. Absent
/// `(date, symbol)` pairs are masked.
pub fn read_returns<R: Read>(reader: R, source: &str) -> Result<ReturnPanel> {
    let rows = read_rows::<_, ReturnRow>(reader, source, &RETURN_HEADER)?;
    let mut dates: Vec<String> = rows.iter().map(|(_, r)| r.date.clone()).collect();
    dates.sort();
    dates.dedup();
    let mut symbols = NodeIndex::default();
    for (_, r) in &rows {
        symbols.get_or_insert(&r.symbol);
    }
    let (t, n) = (dates.len(), symbols.len());
    let mut values = DMatrix::zeros(t, n);
    let mut valid = vec![false; t * n];
    for (line, r) in &rows {
        if !r.value.is_finite() {
            return Err(format_err(source, *line, "non-finite return"));
        }
        let d = dates.binary_search(&r.date).expect("date was collected");
        let j = symbols.id(&r.symbol).expect("symbol was collected");
        if valid[d * n + j] {
            return Err(format_err(source, *line, format!("duplicate return for {} on {}", r.symbol, r.date)));
        }
        valid[d * n + j] = true;
        values[(d, j)] = r.value;
    }
    ReturnPanel::new(dates, symbols.labels().to_vec(), values, valid)
}

pub fn write_returns<W: Write>(w: W, source: &str, panel: &ReturnPanel) -> Result<()> {
    let mut wtr = writer(w, &RETURN_HEADER, source)?;
    for d in 0..panel.n_days() {
        for j in 0..panel.n_assets() {
            if let Some(r) = panel.get(d, j) {
                wtr.write_record([panel.dates()[d].as_str(), &panel.symbols()[j], &r.to_string()])
                    .map_err(|e| write_err(source, e))?;
            }
        }
    }
    finish(wtr, source)
}

pub fn read_bench<R: Read>(reader: R, source: &str) -> Result<Vec<BenchRecord>> {
    Ok(read_rows::<_, BenchRecord>(reader, source, &BENCH_HEADER)?
        .into_iter()
        .map(|(_, r)| r)
        .collect())
}

pub fn write_bench<W: Write>(w: W, source: &str, records: &[BenchRecord]) -> Result<()> {
    let mut wtr = writer(w, &BENCH_HEADER, source)?;
    for r in records {
        wtr.write_record([
            r.method.name(),
            &r.n.to_string(),
            &r.s.to_string(),
            &r.replication.to_string(),
            &r.row_rate.to_string(),
            &r.col_rate.to_string(),
        ])
        .map_err(|e| write_err(source, e))?;
    }
    finish(wtr, source)
}

/// One row per horizon: mean quartile returns (quartile 1 = losers), mean
/// long-short, its Newey-West t-statistic (empty when undefined) and the
/// number of formation days.
pub fn write_backtest<W: Write>(w: W, source: &str, result: &PortfolioResult) -> Result<()> {
    let mut wtr = writer(w, &BACKTEST_HEADER, source)?;
    for h in &result.horizons {
        let mut rec: Vec<String> = vec![h.h.to_string()];
        rec.extend(h.mean_quartiles.iter().map(f64::to_string));
        rec.push(h.mean_long_short.to_string());
        rec.push(h.nw_t.map(|t| t.to_string()).unwrap_or_default());
        rec.push(h.days.len().to_string());
        wtr.write_record(&rec).map_err(|e| write_err(source, e))?;
    }
    finish(wtr, source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::Method;
    use proptest::prelude::*;

    fn roundtrip_edges(adj: &AdjacencySequence, nodes: &NodeIndex) -> AdjacencySequence {
        let mut buf = Vec::new();
        write_edges(&mut buf, "mem", adj, nodes).unwrap();
        let mut seen = nodes.clone();
        let periods = read_edges(buf.as_slice(), "mem", &mut seen).unwrap();
        assert_eq!(&seen, nodes);
        edges_to_adjacency(periods, nodes.len(), Some(adj.n_periods())).unwrap()
    }

    #[test]
    fn edge_errors_carry_line_numbers() {
        let mut nodes = NodeIndex::default();
        let bad = "t,src,dst\n0,a,b\n0,c,c\n";
        match read_edges(bad.as_bytes(), "e.csv", &mut nodes) {
            Err(CascError::Format { path, line, .. }) => assert_eq!((path.as_str(), line), ("e.csv", 3)),
            other => panic!("{other:?}"),
        }
        let bad = "t,src,dst\n0,a,b\nx,a,b\n";
        assert!(matches!(
            read_edges(bad.as_bytes(), "e.csv", &mut NodeIndex::default()),
            Err(CascError::Format { line: 3, .. })
        ));
        let bad = "t,from,to\n";
        assert!(matches!(
            read_edges(bad.as_bytes(), "e.csv", &mut NodeIndex::default()),
            Err(CascError::Format { line: 1, .. })
        ));
        let dup = "t,src,dst\n1,a,b\n1,a,b\n";
        assert!(matches!(
            read_edges(dup.as_bytes(), "e.csv", &mut NodeIndex::default()),
            Err(CascError::Format { line: 3, .. })
        ));
    }

    #[test]
    fn covariates_fix_node_order() {
        let mut nodes = NodeIndex::default();
        let cov = read_covariates("node,cov,value\nz,1,2.5\ny,0,1\n".as_bytes(), "c", &mut nodes).unwrap();
        let periods = read_edges("t,src,dst\n0,x,z\n".as_bytes(), "e", &mut nodes).unwrap();
        assert_eq!(nodes.labels(), ["z", "y", "x"]);
        let x = covariates_to_matrix(&cov, nodes.len(), None).unwrap();
        assert_eq!(x.matrix().shape(), (3, 2));
        assert_eq!(x.matrix()[(0, 1)], 2.5);
        let adj = edges_to_adjacency(periods, 3, Some(2)).unwrap();
        assert_eq!(adj.n_periods(), 2);
        assert!(adj.at(0).contains(2, 0));
    }

    #[test]
    fn missing_file_is_io_error_with_path() {
        match open(Path::new("/nonexistent/edges.csv")) {
            Err(CascError::Io { path, .. }) => assert_eq!(path, "/nonexistent/edges.csv"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn membership_requires_every_node() {
        let mut nodes = NodeIndex::numbered(2);
        let partial = "t,node,row_community,col_community\n0,n0,0,1\n";
        assert!(read_membership(partial.as_bytes(), "m", &mut nodes).is_err());
        let gap = "t,node,row_community,col_community\n0,a,0,1\n1,b,1,0\n";
        assert!(read_membership(gap.as_bytes(), "m", &mut NodeIndex::default()).is_err());
        let bad = "t,node,row_community,col_community\n0,a,0,1\n0,b,x,0\n";
        assert!(matches!(
            read_membership(bad.as_bytes(), "m", &mut NodeIndex::default()),
            Err(CascError::Format { line: 3, .. })
        ));
        let mut fresh = NodeIndex::default();
        let ok = "t,node,row_community,col_community\n0,b,0,1\n0,a,1,0\n";
        let m = read_membership(ok.as_bytes(), "m", &mut fresh).unwrap();
        assert_eq!(fresh.labels(), ["b", "a"]);
        assert_eq!((m.rows(0), m.cols(0)), (&[0, 1][..], &[1, 0][..]));
    }

    #[test]
    fn returns_mask_absent_pairs() {
        let csv = "date,symbol,return\n2020-01-02,BTC,0.01\n2020-01-01,ETH,-0.02\n2020-01-01,BTC,0.03\n";
        let p = read_returns(csv.as_bytes(), "r").unwrap();
        assert_eq!(p.dates(), ["2020-01-01", "2020-01-02"]);
        assert_eq!(p.symbols(), ["BTC", "ETH"]);
        assert_eq!(p.get(0, 0), Some(0.03));
        assert_eq!(p.get(1, 1), None);
    }

    #[test]
    fn bench_roundtrip_is_exact() {
        let recs = vec![
            BenchRecord { method: Method::CascDynamic, n: 20, s: 10, replication: 0, row_rate: 0.1 + 0.2, col_rate: 1.0 / 3.0 },
            BenchRecord { method: Method::DisimDc, n: 40, s: 10, replication: 1, row_rate: 0.0, col_rate: 0.5 },
        ];
        let mut buf = Vec::new();
        write_bench(&mut buf, "b", &recs).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("method,n,s,replication,row_rate,col_rate\ncasc-dyn,20,10,0,"));
        assert_eq!(read_bench(buf.as_slice(), "b").unwrap(), recs);
    }

    fn adjacency_strategy() -> impl Strategy<Value = AdjacencySequence> {
        (2usize..8, 1usize..4).prop_flat_map(|(n, t)| {
            proptest::collection::vec(proptest::collection::vec(proptest::bool::weighted(0.3), n * n), t).prop_map(move |periods| {
                let mats = periods
                    .into_iter()
                    .map(|bits| {
                        let edges = (0..n * n).filter(|&k| bits[k] && k / n != k % n).map(|k| (k / n, k % n));
                        SparseBinary::from_edges(n, edges).unwrap()
                    })
                    .collect();
                AdjacencySequence::new(n, mats).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn edges_roundtrip(adj in adjacency_strategy()) {
            // nodes that never appear in an edge must already be registered
            let nodes = NodeIndex::numbered(adj.n_nodes());
            prop_assert_eq!(roundtrip_edges(&adj, &nodes), adj);
        }

        #[test]
        fn covariates_roundtrip(vals in proptest::collection::vec(prop_oneof![Just(0.0), -1e6f64..1e6], 6)) {
            let x = DMatrix::from_column_slice(3, 2, &vals);
            let cov = CovariateMatrix::new(x).unwrap();
            let nodes = NodeIndex::numbered(3);
            let mut buf = Vec::new();
            write_covariates(&mut buf, "c", &cov, &nodes).unwrap();
            let mut seen = nodes.clone();
            let trip = read_covariates(buf.as_slice(), "c", &mut seen).unwrap();
            prop_assert_eq!(covariates_to_matrix(&trip, 3, Some(2)).unwrap(), cov);
        }

        #[test]
        fn membership_roundtrip(labels in proptest::collection::vec((0usize..3, 0usize..4), 5).prop_flat_map(|first| {
            proptest::collection::vec(Just(first), 1..4)
        })) {
            let rows: Vec<Vec<usize>> = labels.iter().map(|p| p.iter().map(|x| x.0).collect()).collect();
            let cols: Vec<Vec<usize>> = labels.iter().map(|p| p.iter().map(|x| x.1).collect()).collect();
            let k = |side: &[Vec<usize>]| side.iter().flatten().max().unwrap() + 1;
            let m = MembershipSequence::new_relaxed(k(&rows), k(&cols), rows, cols).unwrap();
            let nodes = NodeIndex::numbered(5);
            let mut buf = Vec::new();
            write_membership(&mut buf, "m", &m, &nodes).unwrap();
            let mut seen = nodes.clone();
            prop_assert_eq!(read_membership(buf.as_slice(), "m", &mut seen).unwrap(), m);
            prop_assert_eq!(seen, nodes);
        }

        #[test]
        fn returns_roundtrip(vals in proptest::collection::vec(proptest::option::weighted(0.8, -0.5f64..0.5), 12)) {
            let valid: Vec<bool> = vals.iter().map(Option::is_some).collect();
            // every date and symbol needs at least one observation to survive
            prop_assume!((0..4).all(|d| (0..3).any(|j| valid[d * 3 + j])));
            prop_assume!((0..3).all(|j| (0..4).any(|d| valid[d * 3 + j])));
            let m = DMatrix::from_fn(4, 3, |d, j| vals[d * 3 + j].unwrap_or(0.0));
            let dates: Vec<String> = (1..=4).map(|d| format!("2021-03-0{d}")).collect();
            let p = ReturnPanel::new(dates, vec!["A".into(), "B".into(), "C".into()], m, valid).unwrap();
            let mut buf = Vec::new();
            write_returns(&mut buf, "r", &p).unwrap();
            let back = read_returns(buf.as_slice(), "r").unwrap();
            // symbol order is first appearance in the file
            let order: Vec<usize> = back.symbols().iter().map(|s| p.symbols().iter().position(|x| x == s).unwrap()).collect();
            for d in 0..4 {
                for (jb, &j) in order.iter().enumerate() {
                    prop_assert_eq!(back.get(d, jb), p.get(d, j));
                }
            }
        }
    }
}
