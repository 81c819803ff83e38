use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the graph, solver and certification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("set must be a nonempty proper subset of the vertices")]
    TrivialSet,

    #[error("graph is empty")]
    EmptyGraph,

    #[error("graph is disconnected (second zero eigenvalue {value:e}); extract the largest connected component first (--lcc)")]
    Disconnected { value: f64 },

    #[error("eigensolver did not converge: residual {residual:e} after {iterations} matvecs")]
    EigNotConverged { residual: f64, iterations: usize },

    #[error("no vertex set has volume in [{lo}, {hi}]")]
    InfeasibleWindow { lo: f64, hi: f64 },

    #[error("size cap exceeded: n = {n} > {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("k-core is empty for k = {k} (max core {max_core})")]
    EmptyCore { k: usize, max_core: usize },

    #[error("mu values must be strictly increasing (got {prev} then {next})")]
    UnorderedMu { prev: f64, next: f64 },

    #[error("no overlap between sampled volumes and the mu grid")]
    RangeMismatch,

    #[error("upper envelope {upper} below certified bound {lower} at mu = {mu}")]
    Inconsistent { mu: f64, upper: f64, lower: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
