//! Mean-variance-skewness-kurtosis (MVSK) portfolio optimization.
//!
//! The library builds the quartic portfolio objective
//!
//! ```text
//! f(x) = -c1*m1(x) + c2*m2(x) - c3*m3(x) + c4*m4(x)
//! ```
//!
//! from a matrix of asset returns, rewrites it as a difference of convex
//! polynomials, and minimizes it over the standard simplex
//! `{x >= 0, sum x = 1}` with four DCA-family solvers.
//!
//! Pipeline:
//! - [`moments`] estimates the mean vector, covariance matrix, coskewness and
//!   cokurtosis tensors from returns and evaluates portfolio moments.
//! - [`poly`] is the sparse polynomial type plus the objective builder.
//! - [`dcsos`] constructs the two DC decompositions: the sums-of-squares
//!   based pair (G, H) and the universal quadratic pair with parameter eta.
//! - [`subsolvers`] provides exact simplex projections and a projected
//!   gradient minimizer for the convex subproblems.
//! - [`dca`] runs the outer solvers: DCA, BDCA, UDCA, UBDCA.
//! - [`frontier`] sweeps return-constrained models into efficient frontiers.

pub mod dca;
pub mod dcsos;
pub mod frontier;
pub mod linalg;
pub mod moments;
pub mod poly;
pub mod subsolvers;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("csv parse error at row {row}, column {col}: {msg}")]
    CsvParse { row: usize, col: usize, msg: String },
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
