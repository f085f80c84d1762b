use crate::numerics::{default_step, finite_diff_hessian, Matrix};
use crate::scores::{DensityScorer, RuleSpec};

use super::{EstimationError, Member, ParametricFamily, Result};

/// A rule bound to one family member, ready to score many observations.
pub(crate) enum Evaluator<'a> {
    Discrete(Vec<f64>),
    Density(DensityScorer<'a>),
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(rule: &'a RuleSpec, member: &'a Member) -> Result<Self> {
        Ok(match member {
            Member::Discrete(q) => Evaluator::Discrete(rule.score_vector(q)?),
            Member::Density(q) => Evaluator::Density(rule.density_scorer(q)?),
        })
    }

    pub(crate) fn score(&self, x: &[f64]) -> Result<f64> {
        match self {
            Evaluator::Density(s) => Ok(s.score(x)?),
            Evaluator::Discrete(scores) => {
                let index = discrete_index(x, scores.len())?;
                Ok(scores[index])
            }
        }
    }
}

fn discrete_index(x: &[f64], size: usize) -> Result<usize> {
    match x {
        [v] if *v >= 0.0 && v.fract() == 0.0 && (*v as usize) < size => Ok(*v as usize),
        _ => Err(EstimationError::Specification(format!(
            "{x:?} is not an outcome index below {size}"
        ))),
    }
}

/// `S(x, P_θ)`.
pub fn score_value<F>(rule: &RuleSpec, family: &F, x: &[f64], theta: &[f64]) -> Result<f64>
where
    F: ParametricFamily + ?Sized,
{
    check_theta(family, theta)?;
    let member = family.member(theta)?;
    Evaluator::new(rule, &member)?.score(x)
}

pub(crate) fn check_theta<F>(family: &F, theta: &[f64]) -> Result<()>
where
    F: ParametricFamily + ?Sized,
{
    if family.theta_domain().contains(theta) {
        Ok(())
    } else {
        Err(EstimationError::OutsideDomain {
            theta: theta.to_vec(),
        })
    }
}

/// `s(x, θ) = ∇_θ S(x, P_θ)`: closed form when the family registers one for
/// the rule, central differences otherwise.
pub fn score_gradient<F>(rule: &RuleSpec, family: &F, x: &[f64], theta: &[f64]) -> Result<Vec<f64>>
where
    F: ParametricFamily + ?Sized,
{
    check_theta(family, theta)?;
    if let Some(g) = family.analytic_score_gradient(rule, x, theta) {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(EstimationError::InfiniteScore {
                theta: theta.to_vec(),
            });
        }
        return Ok(g);
    }
    let infinite = || EstimationError::InfiniteScore {
        theta: theta.to_vec(),
    };
    let center = score_value(rule, family, x, theta)?;
    if !center.is_finite() {
        return Err(infinite());
    }
    let domain = family.theta_domain();
    let mut work = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let h = default_step(theta[i]).min(0.5 * domain.room(theta, i));
        work[i] = theta[i] + h;
        let up = score_value(rule, family, x, &work)?;
        work[i] = theta[i] - h;
        let down = score_value(rule, family, x, &work)?;
        work[i] = theta[i];
        if !(up.is_finite() && down.is_finite()) {
            return Err(infinite());
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// `∇_θ s(x, θ)`, symmetrised: differences of the analytic gradient when
/// available, second-order differences of `S` otherwise.
pub fn score_hessian<F>(rule: &RuleSpec, family: &F, x: &[f64], theta: &[f64]) -> Result<Matrix>
where
    F: ParametricFamily + ?Sized,
{
    check_theta(family, theta)?;
    let p = theta.len();
    if family.analytic_score_gradient(rule, x, theta).is_some() {
        let domain = family.theta_domain();
        let mut work = theta.to_vec();
        let mut jac = Matrix::zeros(p, p);
        for j in 0..p {
            let h = default_step(theta[j]).min(0.5 * domain.room(theta, j));
            work[j] = theta[j] + h;
            let up = score_gradient(rule, family, x, &work)?;
            work[j] = theta[j] - h;
            let down = score_gradient(rule, family, x, &work)?;
            work[j] = theta[j];
            for i in 0..p {
                jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
            }
        }
        return Ok(jac.symmetrized());
    }
    let hess = finite_diff_hessian(
        |t| score_value(rule, family, x, t).unwrap_or(f64::NAN),
        theta,
    )?;
    Ok(Matrix::new(p, p, hess)?.symmetrized())
}
