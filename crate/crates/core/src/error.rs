use thiserror::Error;

pub type Result<T, E = CascError> = std::result::Result<T, E>;

/// Every failure the toolkit can report. Each variant carries a stable
/// machine-readable code (see [`CascError::code`]).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CascError {
    #[error("kernel order {ell} exceeds bandwidth support r+1 = {}", .r + 1)]
    InfeasibleKernel { r: usize, ell: usize },

    #[error("period {t} has insufficient history for bandwidth {r}")]
    InsufficientHistory { t: usize, r: usize },

    #[error("period {t}: degenerate graph (no edges, zero regularizer)")]
    DegenerateGraph { t: usize },

    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(String),

    #[error("block probability {value} at period {t}, entry ({row}, {col}) is outside [0, 1]")]
    RangeViolation {
        t: usize,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("community {community} is empty at period {t}")]
    EmptyCommunity { community: usize, t: usize },

    #[error("horizon {horizon} from day {day} runs past the end of the panel ({len} days)")]
    InsufficientFuture {
        day: usize,
        horizon: usize,
        len: usize,
    },

    #[error("{solver} did not converge within {iterations} iterations")]
    ConvergenceFailure {
        solver: &'static str,
        iterations: usize,
    },

    #[error("need at least {needed} assets with a signal, found {found}")]
    TooFewAssets { needed: usize, found: usize },

    #[error("series is degenerate: {0}")]
    DegenerateSeries(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: u64,
        message: String,
    },

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl CascError {
    pub fn code(&self) -> &'static str {
        match self {
            CascError::InfeasibleKernel { .. } => "E_INFEASIBLE_KERNEL",
            CascError::InsufficientHistory { .. } => "E_INSUFFICIENT_HISTORY",
            CascError::DegenerateGraph { .. } => "E_DEGENERATE_GRAPH",
            CascError::InfeasibleConfig(_) => "E_INFEASIBLE_CONFIG",
            CascError::RangeViolation { .. } => "E_RANGE_VIOLATION",
            CascError::DimensionMismatch(_) => "E_DIMENSION_MISMATCH",
            CascError::EmptyCommunity { .. } => "E_EMPTY_COMMUNITY",
            CascError::InsufficientFuture { .. } => "E_INSUFFICIENT_FUTURE",
            CascError::ConvergenceFailure { .. } => "E_CONVERGENCE_FAILURE",
            CascError::TooFewAssets { .. } => "E_TOO_FEW_ASSETS",
            CascError::DegenerateSeries(_) => "E_DEGENERATE_SERIES",
            CascError::InvalidInput(_) => "E_INVALID_INPUT",
            CascError::Format { .. } => "E_FORMAT",
            CascError::Io { .. } => "E_IO",
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        CascError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
