//! Gaussian Markov chain with tridiagonal precision
//! `Φ = α I + β (adjacency of the path)`: exact likelihood through the
//! closed-form determinant, the Hyvärinen and pseudo-likelihood estimators
//! (which coincide), and the Wishart extension for repeated vectors.
//!
//! Boundary convention: `z_i = y_{i−1} + y_{i+1}` with `y_0 = y_{N+1} = 0`.

mod chain;
mod family;
mod wishart;

pub use chain::{
    chain_statistics, exact_mle, exact_neg_loglik, hyvarinen_closed_form, hyvarinen_objective,
    neighbour_sums, pseudo_loglik, refit_in_omega, simulate_chain, tridiag_logdet, ChainData,
    ChainStatistics, HyvarinenFit, MleFit, TridiagonalModel,
};
pub use family::{GaussianChainConditionals, TridiagonalFamily};
pub use wishart::{wishart_criterion, wishart_hyvarinen_estimate, WishartData, WishartFit};

use thiserror::Error;

use crate::numerics::NumericsError;
use crate::scores::ScoreError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GmrfError {
    #[error("(α, β) = ({alpha}, {beta}) lies outside Ω: the constraint α > 2|β| is violated")]
    OutsideOmega { alpha: f64, beta: f64 },

    #[error("α must be positive, got {0}")]
    NonPositiveAlpha(f64),

    #[error("invalid chain data: {0}")]
    InvalidData(String),

    #[error("degenerate statistics: {0}")]
    Degenerate(String),

    #[error("the Wishart density does not exist for ν = {nu} < N = {n}")]
    WishartNonexistent { nu: usize, n: usize },

    #[error("ν = {nu}, N = {n} gives a multiplier ν − N − 1 ≤ 0; need ν ≥ N + 2")]
    NonPositiveMultiplier { nu: usize, n: usize },

    #[error("scatter matrix S is singular")]
    SingularScatter,

    #[error(transparent)]
    Numerics(#[from] NumericsError),

    #[error(transparent)]
    Score(#[from] ScoreError),
}

pub type Result<T> = std::result::Result<T, GmrfError>;
