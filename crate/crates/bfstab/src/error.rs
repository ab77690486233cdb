use thiserror::Error;

/// Every failure mode of the toolkit. `Display` output is a single line so the
/// CLI can forward it verbatim.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain: depth h={h} outside admissible range ({min}, {max})")]
    Domain { h: f64, min: f64, max: f64 },

    #[error("domain: {0}")]
    InvalidArgument(String),

    #[error("no-sign-change: e_WB has the same sign at h={a} and h={b}")]
    NoSignChange { a: f64, b: f64 },

    #[error("non-convergence: {what} after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("truncation-mismatch: {left} vs {right}")]
    TruncationMismatch { left: usize, right: usize },

    #[error("mu-out-of-zone: mu={0} not in [0, 0.5)")]
    MuOutOfZone(f64),

    #[error("eigensolver: {0}")]
    Eigensolver(String),

    #[error("resolvent: singular solve at contour node {node}")]
    ResolventSingular { node: usize },

    #[error("projector-rank: expected 4, found {0}")]
    ProjectorRank(usize),

    #[error("series-divergence: ||P - P00|| = {0:.3e} is not below 1")]
    SeriesDivergence(f64),

    #[error("basis-degenerate: symplectic Gram off by {0:e}")]
    BasisDegenerate(f64),

    #[error("near-singular: Sylvester determinant {0:e}")]
    NearSingular(f64),

    #[error("regime: {0}")]
    Regime(String),

    #[error("cluster-ambiguity: |lambda_5|/|lambda_4| = {0:.3}")]
    ClusterAmbiguity(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
