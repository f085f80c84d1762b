//! Bayesian model comparison by scoring the marginal (prior predictive)
//! distribution of the data. The log score gives the Bayes factor and needs
//! proper priors; the Hyvärinen score is homogeneous, so the arbitrary
//! constant of an improper prior cancels and only a proper posterior is
//! required.

mod bayes;
mod compare;
mod expfam;
mod linear;

pub use bayes::{
    hyvarinen_predictive_score, log_bayes_factor, marginal_density, posterior_moments,
    BayesModelSpec, MarginalDensity, PosteriorMoments, Prior,
};
pub use compare::{
    compare_models, report_from_entries, score_difference, MarginalModel, MarginalScore, ModelComparisonReport,
    ModelEntry, PairDifference,
};
pub use expfam::{expfam_hyvarinen_score, ExponentialFamilyTerms, NormalMeanTerms};
pub use linear::{
    aic_gap, nlm_improper_hyvarinen, nlm_proper_hyvarinen, prequential_hyvarinen,
    prequential_terms, LinearPrior, NormalLinearModel,
};

use thiserror::Error;

use crate::estimation::EstimationError;
use crate::numerics::NumericsError;
use crate::scores::ScoreError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelSelError {
    #[error(
        "model `{model}` has an improper prior: its marginal density carries an arbitrary \
         constant c_M, so {operation} would depend on the ratio of arbitrary constants"
    )]
    ImproperPrior { model: String, operation: &'static str },

    #[error("posterior of model `{model}` is improper: {detail}")]
    ImproperPosterior { model: String, detail: String },

    #[error("quadrature unavailable: {0}")]
    Quadrature(String),

    #[error("design matrix has rank {rank} but {columns} columns")]
    RankDeficient { rank: usize, columns: usize },

    #[error("rank of the first p = {p} design rows stalls at row {row}; the prequential fit needs them to have full rank")]
    RankDeficientBurnIn { row: usize, p: usize },

    #[error("score not defined: {0}")]
    NotDefined(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("rule `{rule}` is not supported for marginal scores; use log or hyvarinen")]
    UnsupportedRule { rule: String },

    #[error("specification error: {0}")]
    Specification(String),

    #[error(transparent)]
    Estimation(#[from] EstimationError),

    #[error(transparent)]
    Score(#[from] ScoreError),

    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, ModelSelError>;
