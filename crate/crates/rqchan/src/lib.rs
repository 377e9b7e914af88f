//! Numerical toolkit for random quantum channels induced by Haar isometries.
//!
//! The crate samples channels `Φ(X) = Σ A_i X A_i†` from truncated Haar
//! unitaries, measures their singular-value and eigenvalue gaps (densely and
//! matrix-free), cross-checks Monte Carlo estimates against an exact
//! Weingarten moment engine, evaluates the closed-form gap bounds built from
//! Marchenko–Pastur quadrature, and runs the translationally-invariant MPS
//! purity experiments driven by the same channel ensemble.

extern crate blas_src;

pub mod bounds;
pub mod channels;
pub mod cli;
pub mod moments;
pub mod mps;
pub mod perm_weingarten;

use thiserror::Error as ThisError;

/// Crate-wide error type.
#[derive(Debug, ThisError)]
pub enum Error {
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("order too large: p = {order} exceeds cap {cap}")]
    OrderTooLarge { order: usize, cap: usize },

    #[error("Gram matrix may be singular: order p = {order} needs dimension >= p, got {dimension}")]
    GramSingular { order: usize, dimension: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("dense representation refused: {0} entries exceed the configured cap of {1}")]
    DenseTooLarge(usize, usize),

    #[error("iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("quadrature did not converge (last change {0:.3e})")]
    QuadratureNotConverged(f64),

    #[error("no sign change in bracket [{0}, {1}]")]
    NoSignChange(f64, f64),

    #[error("leading eigenvalue appears degenerate: {0}")]
    DegenerateFixedPoint(String),

    #[error("spectral gap below resolution: s1 = {s1:.6e}, s2 = {s2:.6e}")]
    GapBelowResolution { s1: f64, s2: f64 },

    #[error("linear algebra backend error: {0}")]
    Linalg(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Config(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
