//! Rank-one cutting-and-stacking towers and the trigonometric polynomials
//! they induce.
//!
//! The crate is organized around one object: a sequence of tower stages,
//! each stage described by a height, a number of columns, and a spacer
//! vector. Everything else consumes stages. `trigpoly` evaluates the
//! normalized exponential polynomial of a stage on dyadic grids, `riesz`
//! accumulates products of their squared moduli and runs the associated
//! singularity diagnostics, `cltlab` measures how close the real parts are
//! to Gaussian, `words` expands products of cosines into signed integer
//! combinations of the exponents, and `ornstein` replaces deterministic
//! spacers with random ones and repeats the analysis in expectation.
//!
//! Heights and exponents grow geometrically with stage depth, so they are
//! kept as arbitrary-precision integers throughout. Floating point enters
//! only at evaluation time, where phases are reduced modulo one with enough
//! guard precision to keep grid evaluation trustworthy at any height the
//! configured caps admit.

pub mod cli;
pub mod cltlab;
pub mod config;
pub mod construction;
pub mod gauss;
pub mod ornstein;
pub mod phase;
pub mod report;
pub mod riesz;
pub mod trigpoly;
pub mod words;

use thiserror::Error;

/// Crate-wide error type. Variants carry enough context to name the
/// violated invariant at the CLI boundary.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid stage: {0}")]
    InvalidStage(String),

    #[error("invalid tower: {0}")]
    InvalidTower(String),

    #[error("height would need {bits} bits at stage {stage}, cap is {cap}")]
    HeightCapExceeded { stage: usize, bits: u64, cap: u64 },

    #[error("exact evaluation needs a grid of 2^{required_log2} nodes, cap is 2^{cap_log2}")]
    GridCapExceeded { required_log2: u32, cap_log2: u32 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("word expansion supports at most {max} columns, got {got}")]
    WordLimitExceeded { got: usize, max: usize },

    #[error("word lookup: {0}")]
    WordLookup(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("report serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
