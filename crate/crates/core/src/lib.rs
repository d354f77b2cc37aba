//! Dynamic covariate-assisted spectral co-clustering for time-varying
//! directed networks, with the supporting simulation, network-inference,
//! evaluation and portfolio tooling.
//!
//! The heavy loops (periods, restarts, replications, per-target regressions)
//! run on rayon when the default `parallel` feature is enabled and fall back
//! to sequential iteration otherwise. Every random draw comes from a stream
//! derived from one root seed, so results are identical either way.

pub mod backtest;
pub mod bench;
pub mod cluster;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod kernel;
pub mod lasso;
pub mod linalg;
pub mod model;
pub mod par;
pub mod rng;
pub mod sim;

pub use cluster::{
    cluster_similarities, detect_casc_static, detect_communities, detect_disim_dc, detect_method,
    detect_with_weights, spherical_kmedians, spherical_normalize, truncated_svd, Bandwidth, DetectConfig,
    Detection, KMediansResult, Method, SpectralEmbedding,
};
pub use error::{CascError, Result};
pub use kernel::{build_kernel, lepski_bandwidth, smooth_similarity, KernelSpec, SimilaritySequence};
pub use model::{
    validate_bundle, AdjacencySequence, BlockProbabilitySequence, CovariateMatrix, CovariateWeights,
    DegreeParameters, MembershipSequence, NodeIndex, ReturnPanel, SparseBinary, ValidationReport,
};
