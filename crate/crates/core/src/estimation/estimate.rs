use serde::Serialize;

use crate::numerics::{integrate, minimize_with, Matrix, MinimizeOptions};
use crate::scores::RuleSpec;

use super::gradient::{check_theta, Evaluator};
use super::{score_gradient, score_hessian, EstimationError, Member, ParametricFamily, Result};

/// Minimum-score estimate with empirical sandwich asymptotics.
#[derive(Debug, Clone, Serialize)]
pub struct EstimationResult {
    pub theta_hat: Vec<f64>,
    /// `Σᵢ S(xᵢ, θ̂)`.
    pub total_score: f64,
    pub j: Option<Matrix>,
    pub k: Option<Matrix>,
    pub godambe: Option<Matrix>,
    /// `(n G)⁻¹`.
    pub sandwich_cov: Option<Matrix>,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub n: usize,
    /// Why the asymptotic fields are missing, if they are.
    pub asymptotics_note: Option<String>,
}

/// Minimise `Σᵢ S(xᵢ, θ)` over the family's parameter box, then estimate
/// `J` and `K` at `θ̂` by sample averages.
pub fn minimum_score_estimate<F>(
    rule: &RuleSpec,
    family: &F,
    data: &[Vec<f64>],
    start: Option<&[f64]>,
) -> Result<EstimationResult>
where
    F: ParametricFamily + ?Sized,
{
    if data.is_empty() {
        return Err(EstimationError::EmptyData);
    }
    let start = match start {
        Some(s) => s.to_vec(),
        None => family.initial_guess(data),
    };
    check_theta(family, &start)?;
    // surface configuration errors (unnormalized member, bad observation) up front
    let initial = total_score(rule, family, data, &start)?;
    if !initial.is_finite() {
        return Err(EstimationError::InfiniteScore { theta: start });
    }

    let objective = |theta: &[f64]| total_score(rule, family, data, theta).unwrap_or(f64::INFINITY);
    let options = MinimizeOptions {
        tolerance: 1e-12,
        ..MinimizeOptions::default()
    };
    let mut min = minimize_with(objective, &start, &options)?;
    // When the start already solves the score equation and the optimiser only
    // found a round-off improvement, keep the start: the objective cannot
    // distinguish the two, the score equation can.
    if (initial - min.value).abs() <= 1e-12 * (1.0 + initial.abs())
        && residual(rule, family, data, &start) < residual(rule, family, data, &min.argmin)
    {
        min.argmin = start.clone();
        min.value = initial;
    }

    let mut result = EstimationResult {
        total_score: min.value,
        j: None,
        k: None,
        godambe: None,
        sandwich_cov: None,
        converged: min.converged,
        iterations: min.iterations,
        gradient_norm: min.gradient_norm,
        n: data.len(),
        asymptotics_note: None,
        theta_hat: min.argmin,
    };
    match empirical_jk(rule, family, data, &result.theta_hat) {
        Ok((j, k)) => {
            match godambe(&j, &k) {
                Ok(g) => {
                    result.sandwich_cov = g.inverse().ok().map(|inv| inv.symmetrized().scale(1.0 / data.len() as f64));
                    if result.sandwich_cov.is_none() {
                        result.asymptotics_note = Some("Godambe matrix is singular".into());
                    }
                    result.godambe = Some(g);
                }
                Err(e) => result.asymptotics_note = Some(e.to_string()),
            }
            result.j = Some(j);
            result.k = Some(k);
        }
        Err(e) => result.asymptotics_note = Some(e.to_string()),
    }
    Ok(result)
}

fn total_score<F>(rule: &RuleSpec, family: &F, data: &[Vec<f64>], theta: &[f64]) -> Result<f64>
where
    F: ParametricFamily + ?Sized,
{
    if !family.theta_domain().contains(theta) {
        return Ok(f64::INFINITY);
    }
    let member = family.member(theta)?;
    let eval = Evaluator::new(rule, &member)?;
    let mut total = 0.0;
    for (index, x) in data.iter().enumerate() {
        total += eval.score(x).map_err(|e| EstimationError::BadObservation {
            index,
            message: e.to_string(),
        })?;
    }
    Ok(total)
}

/// `|Σᵢ s(xᵢ, θ)|`, infinite when a gradient is unavailable.
fn residual<F>(rule: &RuleSpec, family: &F, data: &[Vec<f64>], theta: &[f64]) -> f64
where
    F: ParametricFamily + ?Sized,
{
    let mut sum = vec![0.0; theta.len()];
    for x in data {
        match score_gradient(rule, family, x, theta) {
            Ok(s) => sum.iter_mut().zip(&s).for_each(|(a, b)| *a += b),
            Err(_) => return f64::INFINITY,
        }
    }
    sum.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `G = K J⁻¹ K`.
pub(crate) fn godambe(j: &Matrix, k: &Matrix) -> Result<Matrix> {
    let j_inv = j
        .inverse_spd()
        .or_else(|_| j.inverse())
        .map_err(|_| EstimationError::Singular("J"))?;
    Ok(k.matmul(&j_inv)?.matmul(k)?.symmetrized())
}

/// Sample averages of `s sᵀ` and `∇s` at `theta`.
pub fn empirical_jk<F>(
    rule: &RuleSpec,
    family: &F,
    data: &[Vec<f64>],
    theta: &[f64],
) -> Result<(Matrix, Matrix)>
where
    F: ParametricFamily + ?Sized,
{
    if data.is_empty() {
        return Err(EstimationError::EmptyData);
    }
    let p = theta.len();
    let mut j = Matrix::zeros(p, p);
    let mut k = Matrix::zeros(p, p);
    for x in data {
        let s = score_gradient(rule, family, x, theta)?;
        j = j.add(&Matrix::outer(&s, &s))?;
        k = k.add(&score_hessian(rule, family, x, theta)?)?;
    }
    let n = data.len() as f64;
    Ok((j.scale(1.0 / n).symmetrized(), k.scale(1.0 / n).symmetrized()))
}

/// Model expectations `J(θ)`, `K(θ)`: exact sums for discrete members,
/// quadrature over the member's domain for one-dimensional densities.
pub fn model_based_jk<F>(rule: &RuleSpec, family: &F, theta: &[f64]) -> Result<(Matrix, Matrix)>
where
    F: ParametricFamily + ?Sized,
{
    check_theta(family, theta)?;
    let p = theta.len();
    match family.member(theta)? {
        Member::Discrete(q) => {
            let mut j = Matrix::zeros(p, p);
            let mut k = Matrix::zeros(p, p);
            for (x, &w) in q.probs().iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let obs = [x as f64];
                let s = score_gradient(rule, family, &obs, theta)?;
                j = j.add(&Matrix::outer(&s, &s).scale(w))?;
                k = k.add(&score_hessian(rule, family, &obs, theta)?.scale(w))?;
            }
            Ok((j.symmetrized(), k.symmetrized()))
        }
        Member::Density(q) => {
            let no_grid = || EstimationError::NoQuadrature {
                family: family.name(),
            };
            if q.dimension() != 1 || !q.is_normalized() {
                return Err(no_grid());
            }
            let grid = q.domain().ok_or_else(no_grid)?.clone();
            let nodes = grid.nodes();
            let weights = grid.weights();
            let mut j = Matrix::zeros(p, p);
            let mut k = Matrix::zeros(p, p);
            for (x, w) in nodes.zip(&weights) {
                let dens = q.density(&[x]);
                if dens == 0.0 {
                    continue;
                }
                let s = score_gradient(rule, family, &[x], theta)?;
                j = j.add(&Matrix::outer(&s, &s).scale(w * dens))?;
                k = k.add(&score_hessian(rule, family, &[x], theta)?.scale(w * dens))?;
            }
            // guard against a grid that misses mass
            let mass = integrate(|x| q.density(&[x]), &grid)?;
            if (mass - 1.0).abs() > 1e-6 {
                return Err(no_grid());
            }
            Ok((j.symmetrized(), k.symmetrized()))
        }
    }
}
