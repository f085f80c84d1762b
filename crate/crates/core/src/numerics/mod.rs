//! Shared numerical kernel: quadrature, finite differences, unconstrained
//! minimization, small dense linear algebra and seeded random streams.

mod diff;
mod linalg;
mod optimize;
mod quadrature;
mod rng;

pub use diff::{
    default_step, finite_diff_gradient, finite_diff_gradient_with, finite_diff_hessian,
    finite_diff_laplacian, finite_diff_laplacian_with, second_order_step,
};
pub use linalg::{Cholesky, Matrix};
pub use optimize::{minimize, minimize_with, MinimizeOptions, Minimum};
pub use quadrature::{integrate, simpson_weights, Grid1D};
pub use rng::SeedSpec;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("integrand is not finite at node x = {node} (value {value})")]
    NonFiniteIntegrand { node: f64, value: f64 },

    #[error("function is not finite on the difference stencil at {point:?}")]
    NonFiniteStencil { point: Vec<f64> },

    #[error("step size must be positive, got {0}")]
    InvalidStep(f64),

    #[error("objective is not finite at the starting point")]
    NonFiniteStart,

    #[error("matrix is not positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is singular (pivot {pivot})")]
    Singular { pivot: usize },

    #[error("matrix is not symmetric: entry ({row}, {col}) differs from its transpose")]
    NotSymmetric { row: usize, col: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, NumericsError>;
