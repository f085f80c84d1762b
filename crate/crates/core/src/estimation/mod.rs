//! Minimum-score estimation: the score equation `Σ s(xᵢ, θ) = 0`, Godambe
//! (sandwich) asymptotics, influence functions and B-robustness checks.
//!
//! `s(x, θ) = ∇_θ S(x, P_θ)` is the gradient of a loss, so `K` is positive
//! definite at a proper minimum.

mod estimate;
mod family;
mod gradient;
mod location;
mod montecarlo;
mod robustness;

pub use estimate::{
    empirical_jk, minimum_score_estimate, model_based_jk, EstimationResult,
};
pub use family::{
    BernoulliFamily, DegenerateFamily, Member, NormalFamily, ParamBox, ParametricFamily,
};
pub use gradient::{score_gradient, score_hessian, score_value};
pub use location::{LocationFamily, LocationShape};
pub use montecarlo::{
    check_unbiased_estimating_equation, influence_from, influence_function, sandwich_from_if,
    MonteCarloMean,
};
pub use robustness::{brobustness_check, RobustnessOptions, RobustnessReport};

use thiserror::Error;

use crate::numerics::NumericsError;
use crate::scores::ScoreError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("specification error: {0}")]
    Specification(String),

    #[error("no observations")]
    EmptyData,

    #[error("parameter {theta:?} is outside the parameter domain")]
    OutsideDomain { theta: Vec<f64> },

    #[error("score is infinite at θ = {theta:?}")]
    InfiniteScore { theta: Vec<f64> },

    #[error("the {family} family has no sampler")]
    NoSampler { family: String },

    #[error("no quadrature domain for model expectations under {family}")]
    NoQuadrature { family: String },

    #[error("{0} is singular")]
    Singular(&'static str),

    #[error("observation {index}: {message}")]
    BadObservation { index: usize, message: String },

    #[error(transparent)]
    Score(#[from] ScoreError),

    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, EstimationError>;
