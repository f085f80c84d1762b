use rand::RngCore;
use rand_distr::{Distribution, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::scores::{DensityModel, DiscreteDistribution, RuleSpec};

use super::{EstimationError, Result};

/// Axis-aligned parameter box; bounds may be infinite. Membership is strict,
/// so estimates always lie in the interior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(EstimationError::Specification(format!(
                "invalid parameter box {lower:?} .. {upper:?}"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded(dim: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.lower.len()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(t, (l, u))| t.is_finite() && l < t && t < u)
    }

    /// Distance from coordinate `i` of `theta` to the nearer bound.
    pub(crate) fn room(&self, theta: &[f64], i: usize) -> f64 {
        (theta[i] - self.lower[i]).min(self.upper[i] - theta[i])
    }
}

/// A distribution `P_θ` from a family.
#[derive(Debug, Clone)]
pub enum Member {
    Discrete(DiscreteDistribution),
    Density(DensityModel),
}

/// A parametric family `{P_θ : θ ∈ Θ}`. Observations are real vectors; for
/// discrete families an observation is the one-element vector holding the
/// outcome index.
pub trait ParametricFamily: Send + Sync {
    fn name(&self) -> String;

    fn dimension(&self) -> usize;

    fn theta_domain(&self) -> ParamBox;

    fn member(&self, theta: &[f64]) -> Result<Member>;

    /// Closed-form `s(x, θ)` where one is known for `rule`.
    fn analytic_score_gradient(&self, _rule: &RuleSpec, _x: &[f64], _theta: &[f64]) -> Option<Vec<f64>> {
        None
    }

    fn sample(&self, _theta: &[f64], _rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        None
    }

    fn has_sampler(&self) -> bool {
        false
    }

    /// Starting point for the optimiser when the caller gives none.
    fn initial_guess(&self, _data: &[Vec<f64>]) -> Vec<f64> {
        let domain = self.theta_domain();
        domain
            .lower()
            .iter()
            .zip(domain.upper())
            .map(|(&l, &u)| match (l.is_finite(), u.is_finite()) {
                (true, true) => 0.5 * (l + u),
                (true, false) => l + 1.0,
                (false, true) => u - 1.0,
                (false, false) => 0.0,
            })
            .collect()
    }
}

/// Bernoulli family on `{0, 1}` with `θ = P(1) ∈ (0, 1)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BernoulliFamily;

impl ParametricFamily for BernoulliFamily {
    fn name(&self) -> String {
        "bernoulli".into()
    }

    fn dimension(&self) -> usize {
        1
    }

    fn theta_domain(&self) -> ParamBox {
        ParamBox::new(vec![0.0], vec![1.0]).expect("unit interval")
    }

    fn member(&self, theta: &[f64]) -> Result<Member> {
        Ok(Member::Discrete(DiscreteDistribution::bernoulli(theta[0])?))
    }

    fn analytic_score_gradient(&self, rule: &RuleSpec, x: &[f64], theta: &[f64]) -> Option<Vec<f64>> {
        let q = theta[0];
        let one = x[0] == 1.0;
        let s = match rule {
            RuleSpec::Log if one => -1.0 / q,
            RuleSpec::Log => 1.0 / (1.0 - q),
            RuleSpec::Brier if one => -2.0 * (1.0 - q),
            RuleSpec::Brier => 2.0 * q,
            _ => return None,
        };
        Some(vec![s])
    }

    fn sample(&self, theta: &[f64], rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let u: f64 = Open01.sample(rng);
        Some(vec![if u < theta[0] { 1.0 } else { 0.0 }])
    }

    fn has_sampler(&self) -> bool {
        true
    }

    fn initial_guess(&self, data: &[Vec<f64>]) -> Vec<f64> {
        let n = data.len().max(1) as f64;
        let ones = data.iter().filter(|x| x[0] == 1.0).count() as f64;
        vec![(ones / n).clamp(0.05, 0.95)]
    }
}

/// Normal family with `θ = (μ, σ)`, `σ > 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NormalFamily;

impl ParametricFamily for NormalFamily {
    fn name(&self) -> String {
        "normal".into()
    }

    fn dimension(&self) -> usize {
        2
    }

    fn theta_domain(&self) -> ParamBox {
        ParamBox::new(vec![f64::NEG_INFINITY, 0.0], vec![f64::INFINITY, f64::INFINITY])
            .expect("half-plane")
    }

    fn member(&self, theta: &[f64]) -> Result<Member> {
        Ok(Member::Density(DensityModel::normal(theta[0], theta[1])))
    }

    fn analytic_score_gradient(&self, rule: &RuleSpec, x: &[f64], theta: &[f64]) -> Option<Vec<f64>> {
        if !matches!(rule, RuleSpec::Log) {
            return None;
        }
        let (mu, sd) = (theta[0], theta[1]);
        let r = x[0] - mu;
        Some(vec![-r / (sd * sd), 1.0 / sd - r * r / (sd * sd * sd)])
    }

    fn sample(&self, theta: &[f64], rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let z: f64 = StandardNormal.sample(rng);
        Some(vec![theta[0] + theta[1] * z])
    }

    fn has_sampler(&self) -> bool {
        true
    }

    fn initial_guess(&self, data: &[Vec<f64>]) -> Vec<f64> {
        let n = data.len().max(1) as f64;
        let mean = data.iter().map(|x| x[0]).sum::<f64>() / n;
        let var = data.iter().map(|x| (x[0] - mean).powi(2)).sum::<f64>() / n;
        vec![mean, var.sqrt().max(1e-3)]
    }
}

/// A family whose every member is the point mass on outcome 0: the score
/// never depends on `θ`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DegenerateFamily;

impl ParametricFamily for DegenerateFamily {
    fn name(&self) -> String {
        "degenerate".into()
    }

    fn dimension(&self) -> usize {
        1
    }

    fn theta_domain(&self) -> ParamBox {
        ParamBox::unbounded(1)
    }

    fn member(&self, _theta: &[f64]) -> Result<Member> {
        Ok(Member::Discrete(DiscreteDistribution::from_probs(vec![1.0])?))
    }

    fn analytic_score_gradient(&self, _rule: &RuleSpec, _x: &[f64], _theta: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0])
    }

    fn sample(&self, _theta: &[f64], _rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        Some(vec![0.0])
    }

    fn has_sampler(&self) -> bool {
        true
    }
}
