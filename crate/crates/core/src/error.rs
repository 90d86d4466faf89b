//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the library operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated (shape mismatch, zero
    /// vector, out-of-range parameter, malformed input file, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A dense tensor failed the numerical rank-1 test: some mode unfolding
    /// has a second singular value above `tol` times the first.
    #[error(
        "not rank one: mode {mode} unfolding has sigma_2/sigma_1 = {ratio:.3e}, above tol {tol:.3e}"
    )]
    NotRankOne { mode: usize, ratio: f64, tol: f64 },

    /// The operation is only defined for a restricted class of formats
    /// (the ill-posed constructions require third-order tensors).
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    /// A sample set contained no finite values, so no distribution can be
    /// estimated.
    #[error("empty distribution: no finite samples")]
    EmptyDistribution,

    /// Too few data points for a statistical procedure.
    #[error("insufficient data: {got} points in the fit window, need at least {need}")]
    InsufficientData { need: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
