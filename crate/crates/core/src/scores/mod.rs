//! Scoring rules as values: evaluation of `S(x, Q)` and the functionals a
//! proper rule induces (expected score, generalised entropy, divergence and
//! dependence).
//!
//! Scores are penalties: lower is better. An observation with zero quoted
//! probability under the log rule scores `f64::INFINITY`; that value is a
//! result, not an error, and propagates through sums.

mod composite;
mod convex;
mod density;
mod distribution;
mod functionals;
mod propriety;
mod rule;
mod survival;

pub use composite::{
    composite_score, pseudo_score, ComponentQuote, CompositeComponent, FullConditionals,
    IsingLattice,
};
pub use convex::ConvexFn;
pub use density::DensityModel;
pub use distribution::{DiscreteDistribution, JointDiscrete};
pub use functionals::{dependence, divergence, entropy, expected_score};
pub use propriety::{check_propriety, simplex_lattice, ProprietyReport};
pub use rule::{
    evaluate_score, rule_from_loss, DensityScorer, LossTable, Observation, Quote, RuleFamily,
    RuleParams, RuleSpec,
};
pub use survival::{survival_score, HazardModel, SurvivalObservation};

use thiserror::Error;

use crate::numerics::NumericsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("rule specification error: {0}")]
    Specification(String),

    #[error("the {rule} rule cannot score a {target}")]
    NotApplicable { rule: String, target: &'static str },

    #[error("the {rule} rule needs a normalized density")]
    Unnormalized { rule: String },

    #[error("the {rule} rule needs an integration grid on the density")]
    MissingGrid { rule: String },

    #[error("observation {index} is outside a support of size {size}")]
    OutOfSupport { index: usize, size: usize },

    #[error("observation has dimension {got}, density expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("conditioning event has probability zero at site {site}")]
    ZeroProbabilityCondition { site: usize },

    #[error("hazard is negative ({value}) at u = {at}")]
    NegativeHazard { at: f64, value: f64 },

    #[error("component {index}: {source}")]
    Component {
        index: usize,
        #[source]
        source: Box<ScoreError>,
    },

    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, ScoreError>;
