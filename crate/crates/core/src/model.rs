//! Shared domain types. Everything here is immutable after construction;
//! algorithms live in the sibling modules.

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{CascError, Result};

/// Bijection between node labels (tickers, `n17`, ...) and dense indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodeIndex {
    labels: Vec<String>,
    ids: HashMap<String, usize>,
}

impl NodeIndex {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut index = NodeIndex::default();
        for label in labels {
            let label = label.into();
            if index.ids.contains_key(&label) {
                return Err(CascError::InvalidInput(format!("duplicate node label {label:?}")));
            }
            index.insert(label);
        }
        Ok(index)
    }

    /// Labels `n0, n1, ..., n{N-1}`.
    pub fn numbered(n: usize) -> Self {
        NodeIndex::new((0..n).map(|i| format!("n{i}"))).expect("numbered labels are unique")
    }

    /// Returns the id for `label`, assigning the next free id if unseen.
    pub fn get_or_insert(&mut self, label: &str) -> usize {
        match self.ids.get(label) {
            Some(&id) => id,
            None => self.insert(label.to_string()),
        }
    }

    fn insert(&mut self, label: String) -> usize {
        let id = self.labels.len();
        self.ids.insert(label.clone(), id);
        self.labels.push(label);
        id
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.ids.get(label).copied()
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Sparse directed 0/1 matrix stored as sorted out-neighbour lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseBinary {
    n: usize,
    rows: Vec<Vec<usize>>,
}

impl SparseBinary {
    pub fn empty(n: usize) -> Self {
        SparseBinary {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    /// Builds from `(src, dst)` pairs. Duplicates collapse; self-loops are
    /// kept so that validation can report them.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut rows = vec![Vec::new(); n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(CascError::DimensionMismatch(format!(
                    "edge ({i}, {j}) outside a {n}-node graph"
                )));
            }
            rows[i].push(j);
        }
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
        }
        Ok(SparseBinary { n, rows })
    }

    /// Nonzero pattern of a dense matrix (any entry != 0 counts as an edge).
    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(CascError::DimensionMismatch("adjacency must be square".into()));
        }
        let n = m.nrows();
        let edges = (0..n).flat_map(|i| (0..n).filter(move |&j| m[(i, j)] != 0.0).map(move |j| (i, j)));
        SparseBinary::from_edges(n, edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.rows[i].binary_search(&j).is_ok()
    }

    pub fn n_edges(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&j| (i, j)))
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        self.rows.iter().map(Vec::len).collect()
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for (_, j) in self.edges() {
            deg[j] += 1;
        }
        deg
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j) in self.edges() {
            m[(i, j)] = 1.0;
        }
        m
    }

    /// Relabels nodes: node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        SparseBinary::from_edges(self.n, self.edges().map(|(i, j)| (perm[i], perm[j])))
            .expect("permutation preserves bounds")
    }
}

/// Ordered sequence of directed adjacency matrices over a fixed node set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencySequence {
    n_nodes: usize,
    mats: Vec<SparseBinary>,
}

impl AdjacencySequence {
    /// Rejects mismatched dimensions and self-loops.
    pub fn new(n_nodes: usize, mats: Vec<SparseBinary>) -> Result<Self> {
        let seq = AdjacencySequence::new_unchecked(n_nodes, mats);
        match seq.issues().first() {
            Some(issue) => Err(CascError::InvalidInput(issue.to_string())),
            None => Ok(seq),
        }
    }

    /// Stores the matrices as given; use [`validate_bundle`] to inspect them.
    pub fn new_unchecked(n_nodes: usize, mats: Vec<SparseBinary>) -> Self {
        AdjacencySequence { n_nodes, mats }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_periods(&self) -> usize {
        self.mats.len()
    }

    pub fn at(&self, t: usize) -> &SparseBinary {
        &self.mats[t]
    }

    pub fn mats(&self) -> &[SparseBinary] {
        &self.mats
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        AdjacencySequence {
            n_nodes: self.n_nodes,
            mats: self.mats.iter().map(|m| m.permuted(perm)).collect(),
        }
    }

    fn issues(&self) -> Vec<ValidationIssue> {
        let mut out = Vec::new();
        for (t, m) in self.mats.iter().enumerate() {
            if m.n() != self.n_nodes {
                out.push(ValidationIssue::AdjacencyDimension {
                    t,
                    found: m.n(),
                    expected: self.n_nodes,
                });
                continue;
            }
            for i in 0..m.n() {
                if m.contains(i, i) {
                    out.push(ValidationIssue::NonzeroDiagonal { t, node: i });
                }
            }
        }
        out
    }
}

/// Static N x R node covariate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateMatrix {
    x: DMatrix<f64>,
}

impl CovariateMatrix {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        if x.ncols() == 0 {
            return Err(CascError::InvalidInput("covariate matrix needs R >= 1 columns".into()));
        }
        if let Some((idx, _)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (i, a) = (idx % x.nrows(), idx / x.nrows());
            return Err(CascError::InvalidInput(format!("non-finite covariate at ({i}, {a})")));
        }
        Ok(CovariateMatrix { x })
    }

    pub fn new_unchecked(x: DMatrix<f64>) -> Self {
        CovariateMatrix { x }
    }

    /// N x 1 matrix of zeros: a placeholder for covariate-free runs.
    pub fn zeros(n: usize) -> Self {
        CovariateMatrix { x: DMatrix::zeros(n, 1) }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn n_nodes(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_covariates(&self) -> usize {
        self.x.ncols()
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut x = DMatrix::zeros(self.x.nrows(), self.x.ncols());
        for i in 0..self.x.nrows() {
            x.set_row(perm[i], &self.x.row(i));
        }
        CovariateMatrix { x }
    }
}

/// Per-period R x R symmetric covariate interaction weights. A single matrix
/// applies to every period.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateWeights {
    mats: Vec<DMatrix<f64>>,
}

impl CovariateWeights {
    pub fn new(mats: Vec<DMatrix<f64>>) -> Result<Self> {
        let w = CovariateWeights::new_unchecked(mats);
        if w.mats.is_empty() {
            return Err(CascError::InvalidInput("no covariate weight matrices".into()));
        }
        if let Some(issue) = w.issues(None).into_iter().next() {
            return Err(CascError::InvalidInput(issue.to_string()));
        }
        Ok(w)
    }

    pub fn new_unchecked(mats: Vec<DMatrix<f64>>) -> Self {
        CovariateWeights { mats }
    }

    pub fn constant(w: DMatrix<f64>) -> Result<Self> {
        CovariateWeights::new(vec![w])
    }

    pub fn identity(r: usize) -> Self {
        CovariateWeights {
            mats: vec![DMatrix::identity(r, r)],
        }
    }

    pub fn at(&self, t: usize) -> &DMatrix<f64> {
        if self.mats.len() == 1 {
            &self.mats[0]
        } else {
            &self.mats[t]
        }
    }

    pub fn n_periods(&self) -> usize {
        self.mats.len()
    }

    fn issues(&self, r: Option<usize>) -> Vec<ValidationIssue> {
        let mut out = Vec::new();
        for (t, w) in self.mats.iter().enumerate() {
            let expected = r.unwrap_or(w.nrows());
            if w.nrows() != expected || w.ncols() != expected {
                out.push(ValidationIssue::WeightDimension {
                    t,
                    rows: w.nrows(),
                    cols: w.ncols(),
                    expected,
                });
                continue;
            }
            'outer: for a in 0..w.nrows() {
                for b in 0..w.ncols() {
                    let v = w[(a, b)];
                    if !v.is_finite() {
                        out.push(ValidationIssue::NonFiniteWeight { t, a, b });
                        break 'outer;
                    }
                    if b > a && (v - w[(b, a)]).abs() > 1e-12 {
                        out.push(ValidationIssue::AsymmetricWeight { t, a, b });
                    }
                }
            }
        }
        out
    }
}

/// Per-period row/column community labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MembershipSequence {
    k_rows: usize,
    k_cols: usize,
    rows: Vec<Vec<usize>>,
    cols: Vec<Vec<usize>>,
}

impl MembershipSequence {
    /// Enforces label ranges and that every community is populated in every
    /// period.
    pub fn new(k_rows: usize, k_cols: usize, rows: Vec<Vec<usize>>, cols: Vec<Vec<usize>>) -> Result<Self> {
        let m = MembershipSequence::new_relaxed(k_rows, k_cols, rows, cols)?;
        for t in 0..m.n_periods() {
            if let Some(k) = first_empty(&m.rows[t], k_rows) {
                return Err(CascError::EmptyCommunity { community: k, t });
            }
            if let Some(k) = first_empty(&m.cols[t], k_cols) {
                return Err(CascError::EmptyCommunity { community: k, t });
            }
        }
        Ok(m)
    }

    /// Range checks only. Estimated memberships may leave a community empty.
    pub fn new_relaxed(k_rows: usize, k_cols: usize, rows: Vec<Vec<usize>>, cols: Vec<Vec<usize>>) -> Result<Self> {
        if rows.len() != cols.len() {
            return Err(CascError::DimensionMismatch(format!(
                "{} row periods vs {} column periods",
                rows.len(),
                cols.len()
            )));
        }
        let n = rows.first().map_or(0, Vec::len);
        for (t, (r, c)) in rows.iter().zip(&cols).enumerate() {
            if r.len() != n || c.len() != n {
                return Err(CascError::DimensionMismatch(format!("period {t} has a different node count")));
            }
            if let Some(&bad) = r.iter().find(|&&l| l >= k_rows) {
                return Err(CascError::InvalidInput(format!("row label {bad} >= K_R = {k_rows} at period {t}")));
            }
            if let Some(&bad) = c.iter().find(|&&l| l >= k_cols) {
                return Err(CascError::InvalidInput(format!("column label {bad} >= K_C = {k_cols} at period {t}")));
            }
        }
        Ok(MembershipSequence {
            k_rows,
            k_cols,
            rows,
            cols,
        })
    }

    pub fn k_rows(&self) -> usize {
        self.k_rows
    }

    pub fn k_cols(&self) -> usize {
        self.k_cols
    }

    pub fn n_periods(&self) -> usize {
        self.rows.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn rows(&self, t: usize) -> &[usize] {
        &self.rows[t]
    }

    pub fn cols(&self, t: usize) -> &[usize] {
        &self.cols[t]
    }

    /// Labels on one side: `true` for rows, `false` for columns.
    pub fn side(&self, t: usize, rows: bool) -> &[usize] {
        if rows {
            &self.rows[t]
        } else {
            &self.cols[t]
        }
    }

    /// One-hot N x K matrix of the row labels at `t`.
    pub fn row_matrix(&self, t: usize) -> DMatrix<f64> {
        one_hot(&self.rows[t], self.k_rows)
    }

    pub fn col_matrix(&self, t: usize) -> DMatrix<f64> {
        one_hot(&self.cols[t], self.k_cols)
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        let apply = |v: &Vec<usize>| {
            let mut out = vec![0; v.len()];
            for (i, &l) in v.iter().enumerate() {
                out[perm[i]] = l;
            }
            out
        };
        MembershipSequence {
            k_rows: self.k_rows,
            k_cols: self.k_cols,
            rows: self.rows.iter().map(apply).collect(),
            cols: self.cols.iter().map(apply).collect(),
        }
    }
}

fn first_empty(labels: &[usize], k: usize) -> Option<usize> {
    let mut seen = vec![false; k];
    for &l in labels {
        seen[l] = true;
    }
    seen.iter().position(|s| !s)
}

pub fn one_hot(labels: &[usize], k: usize) -> DMatrix<f64> {
    let mut z = DMatrix::zeros(labels.len(), k);
    for (i, &l) in labels.iter().enumerate() {
        z[(i, l)] = 1.0;
    }
    z
}

/// Per-period K_R x K_C block connection probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockProbabilitySequence {
    mats: Vec<DMatrix<f64>>,
}

impl BlockProbabilitySequence {
    pub fn new(mats: Vec<DMatrix<f64>>) -> Result<Self> {
        let shape = mats.first().map(|m| m.shape());
        for (t, m) in mats.iter().enumerate() {
            if Some(m.shape()) != shape {
                return Err(CascError::DimensionMismatch(format!("block matrix at period {t} changes shape")));
            }
            for ((row, col), &value) in m.iter().enumerate().map(|(idx, v)| ((idx % m.nrows(), idx / m.nrows()), v)) {
                if !(0.0..=1.0).contains(&value) {
                    return Err(CascError::RangeViolation { t, row, col, value });
                }
            }
        }
        Ok(BlockProbabilitySequence { mats })
    }

    pub fn at(&self, t: usize) -> &DMatrix<f64> {
        &self.mats[t]
    }

    pub fn n_periods(&self) -> usize {
        self.mats.len()
    }
}

/// Degree heterogeneity parameters. Within each community the entries of
/// `psi_rows` (resp. `psi_cols`) sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeParameters {
    pub psi_rows: Vec<f64>,
    pub psi_cols: Vec<f64>,
}

impl DegreeParameters {
    /// Normalizes raw positive weights so that each block of `labels` sums
    /// to one.
    pub fn block_normalize(raw: &[f64], labels: &[usize], k: usize) -> Vec<f64> {
        let mut sums = vec![0.0; k];
        for (&w, &l) in raw.iter().zip(labels) {
            sums[l] += w;
        }
        raw.iter().zip(labels).map(|(&w, &l)| w / sums[l]).collect()
    }

    /// Largest deviation of a block sum from one, over both sides.
    pub fn max_block_sum_error(&self, memberships: &MembershipSequence, t: usize) -> f64 {
        let err = |psi: &[f64], labels: &[usize], k: usize| {
            let mut sums = vec![0.0; k];
            for (&p, &l) in psi.iter().zip(labels) {
                sums[l] += p;
            }
            sums.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
        };
        err(&self.psi_rows, memberships.rows(t), memberships.k_rows())
            .max(err(&self.psi_cols, memberships.cols(t), memberships.k_cols()))
    }
}

/// T x N panel of simple returns with an explicit validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    dates: Vec<String>,
    symbols: Vec<String>,
    returns: DMatrix<f64>,
    valid: Vec<bool>,
}

impl ReturnPanel {
    /// `valid` is row-major T x N. Invalid cells are zeroed.
    pub fn new(dates: Vec<String>, symbols: Vec<String>, mut returns: DMatrix<f64>, valid: Vec<bool>) -> Result<Self> {
        let (t, n) = returns.shape();
        if dates.len() != t || symbols.len() != n || valid.len() != t * n {
            return Err(CascError::DimensionMismatch(format!(
                "panel is {t}x{n} but has {} dates, {} symbols, {} mask cells",
                dates.len(),
                symbols.len(),
                valid.len()
            )));
        }
        for d in 0..t {
            for j in 0..n {
                if valid[d * n + j] {
                    if !returns[(d, j)].is_finite() {
                        return Err(CascError::InvalidInput(format!(
                            "non-finite return for {} on {}",
                            symbols[j], dates[d]
                        )));
                    }
                } else {
                    returns[(d, j)] = 0.0;
                }
            }
        }
        Ok(ReturnPanel {
            dates,
            symbols,
            returns,
            valid,
        })
    }

    /// Fully observed panel with generated date labels `d0000, d0001, ...`.
    pub fn from_matrix(returns: DMatrix<f64>) -> Result<Self> {
        let (t, n) = returns.shape();
        ReturnPanel::new(
            (0..t).map(|d| format!("d{d:04}")).collect(),
            (0..n).map(|j| format!("a{j}")).collect(),
            returns,
            vec![true; t * n],
        )
    }

    pub fn n_days(&self) -> usize {
        self.returns.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.returns.ncols()
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn is_valid(&self, day: usize, asset: usize) -> bool {
        self.valid[day * self.n_assets() + asset]
    }

    pub fn get(&self, day: usize, asset: usize) -> Option<f64> {
        self.is_valid(day, asset).then(|| self.returns[(day, asset)])
    }

    pub fn map_returns(&self, f: impl Fn(usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for d in 0..self.n_days() {
            for j in 0..self.n_assets() {
                if self.is_valid(d, j) {
                    out.returns[(d, j)] = f(d, j, self.returns[(d, j)]);
                }
            }
        }
        out
    }
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    AdjacencyDimension { t: usize, found: usize, expected: usize },
    NonzeroDiagonal { t: usize, node: usize },
    CovariateRows { found: usize, expected: usize },
    NoCovariates,
    NonFiniteCovariate { node: usize, covariate: usize },
    WeightDimension { t: usize, rows: usize, cols: usize, expected: usize },
    WeightPeriods { found: usize, expected: usize },
    AsymmetricWeight { t: usize, a: usize, b: usize },
    NonFiniteWeight { t: usize, a: usize, b: usize },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ValidationIssue::*;
        match self {
            AdjacencyDimension { t, found, expected } => {
                write!(f, "adjacency at period {t} is {found}x{found}, expected {expected}x{expected}")
            }
            NonzeroDiagonal { t, node } => write!(f, "nonzero diagonal at ({t}, {node})"),
            CovariateRows { found, expected } => {
                write!(f, "covariate matrix has {found} rows, expected {expected}")
            }
            NoCovariates => write!(f, "covariate matrix has no columns"),
            NonFiniteCovariate { node, covariate } => {
                write!(f, "non-finite covariate at ({node}, {covariate})")
            }
            WeightDimension { t, rows, cols, expected } => {
                write!(f, "weight matrix at period {t} is {rows}x{cols}, expected {expected}x{expected}")
            }
            WeightPeriods { found, expected } => {
                write!(f, "{found} weight matrices for {expected} periods")
            }
            AsymmetricWeight { t, a, b } => {
                write!(f, "asymmetric weight at period {t}: W({a},{b}) != W({b},{a})")
            }
            NonFiniteWeight { t, a, b } => write!(f, "non-finite weight at period {t}, ({a}, {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        self.issues.iter().map(ToString::to_string).collect()
    }
}

/// Checks every structural invariant of an input bundle and reports all
/// violations with their location.
pub fn validate_bundle(adj: &AdjacencySequence, cov: &CovariateMatrix, weights: &CovariateWeights) -> ValidationReport {
    let mut issues = adj.issues();
    let n = adj.n_nodes();
    let x = cov.matrix();
    if x.nrows() != n {
        issues.push(ValidationIssue::CovariateRows {
            found: x.nrows(),
            expected: n,
        });
    }
    if x.ncols() == 0 {
        issues.push(ValidationIssue::NoCovariates);
    }
    for a in 0..x.ncols() {
        for i in 0..x.nrows() {
            if !x[(i, a)].is_finite() {
                issues.push(ValidationIssue::NonFiniteCovariate { node: i, covariate: a });
            }
        }
    }
    if weights.n_periods() != 1 && weights.n_periods() != adj.n_periods() {
        issues.push(ValidationIssue::WeightPeriods {
            found: weights.n_periods(),
            expected: adj.n_periods(),
        });
    }
    issues.extend(weights.issues(Some(x.ncols())));
    ValidationReport { issues }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle() -> (AdjacencySequence, CovariateMatrix, CovariateWeights) {
        let a0 = SparseBinary::from_edges(4, [(0, 1), (1, 2), (3, 0)]).unwrap();
        let a1 = SparseBinary::from_edges(4, [(2, 1)]).unwrap();
        let adj = AdjacencySequence::new(4, vec![a0, a1]).unwrap();
        let cov = CovariateMatrix::new(DMatrix::from_row_slice(4, 2, &[1., 0., 0., 1., 1., 1., 0., 0.])).unwrap();
        (adj, cov, CovariateWeights::identity(2))
    }

    #[test]
    fn consistent_bundle_has_empty_report() {
        let (adj, cov, w) = bundle();
        assert!(validate_bundle(&adj, &cov, &w).is_empty());
    }

    #[test]
    fn diagonal_entry_is_reported_with_location() {
        let (adj, cov, w) = bundle();
        let mut mats = adj.mats().to_vec();
        mats[1] = SparseBinary::from_edges(4, [(2, 1), (3, 3)]).unwrap();
        let bad = AdjacencySequence::new_unchecked(4, mats);
        let report = validate_bundle(&bad, &cov, &w);
        assert_eq!(report.messages(), vec!["nonzero diagonal at (1, 3)".to_string()]);
        assert!(AdjacencySequence::new(4, bad.mats().to_vec()).is_err());
    }

    #[test]
    fn asymmetric_weights_are_reported() {
        let (adj, cov, _) = bundle();
        let w = CovariateWeights::new_unchecked(vec![DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.2, 1.0])]);
        let report = validate_bundle(&adj, &cov, &w);
        assert_eq!(report.issues, vec![ValidationIssue::AsymmetricWeight { t: 0, a: 0, b: 1 }]);
        assert!(report.messages()[0].contains("asymmetric"));
    }

    #[test]
    fn covariate_row_mismatch_is_reported() {
        let (adj, _, w) = bundle();
        let cov = CovariateMatrix::new(DMatrix::zeros(3, 2)).unwrap();
        let report = validate_bundle(&adj, &cov, &w);
        assert!(matches!(report.issues[0], ValidationIssue::CovariateRows { found: 3, expected: 4 }));
    }

    #[test]
    fn memberships_require_populated_communities() {
        assert!(MembershipSequence::new(2, 2, vec![vec![0, 1]], vec![vec![1, 0]]).is_ok());
        assert_eq!(
            MembershipSequence::new(2, 2, vec![vec![0, 0]], vec![vec![1, 0]]),
            Err(CascError::EmptyCommunity { community: 1, t: 0 })
        );
        assert!(MembershipSequence::new_relaxed(2, 2, vec![vec![0, 0]], vec![vec![1, 0]]).is_ok());
        assert!(MembershipSequence::new_relaxed(2, 2, vec![vec![0, 2]], vec![vec![1, 0]]).is_err());
    }

    #[test]
    fn node_index_is_a_bijection() {
        let mut idx = NodeIndex::new(["BTC", "ETH"]).unwrap();
        assert_eq!(idx.get_or_insert("LTC"), 2);
        assert_eq!(idx.get_or_insert("BTC"), 0);
        for id in 0..idx.len() {
            assert_eq!(idx.id(idx.label(id)), Some(id));
        }
        assert!(NodeIndex::new(["a", "a"]).is_err());
    }

    #[test]
    fn permutation_round_trip() {
        let (adj, cov, _) = bundle();
        let perm = [2, 0, 3, 1];
        let mut inv = [0; 4];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        assert_eq!(adj.permuted(&perm).permuted(&inv), adj);
        assert_eq!(cov.permuted(&perm).permuted(&inv), cov);
        assert!(adj.permuted(&perm).at(0).contains(perm[0], perm[1]));
    }

    #[test]
    fn block_probabilities_reject_out_of_range() {
        let bad = DMatrix::from_row_slice(1, 2, &[0.5, 1.2]);
        assert!(matches!(
            BlockProbabilitySequence::new(vec![bad]),
            Err(CascError::RangeViolation { row: 0, col: 1, .. })
        ));
    }

    #[test]
    fn panel_mask_zeroes_invalid_cells() {
        let m = DMatrix::from_row_slice(2, 2, &[0.1, f64::NAN, 0.2, 0.3]);
        let p = ReturnPanel::new(
            vec!["2020-01-01".into(), "2020-01-02".into()],
            vec!["A".into(), "B".into()],
            m,
            vec![true, false, true, true],
        )
        .unwrap();
        assert_eq!(p.get(0, 1), None);
        assert_eq!(p.get(1, 1), Some(0.3));
    }
}
