use serde::Serialize;

use crate::numerics::{Matrix, SeedSpec};
use crate::scores::RuleSpec;

use super::{
    model_based_jk, score_gradient, score_hessian, EstimationError, ParametricFamily, Result,
};

/// Monte Carlo average with per-component standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloMean {
    pub mean: Vec<f64>,
    pub standard_error: Vec<f64>,
    pub draws: usize,
}

fn draw<F>(family: &F, theta: &[f64], n: usize, seed: SeedSpec) -> Result<Vec<Vec<f64>>>
where
    F: ParametricFamily + ?Sized,
{
    let no_sampler = || EstimationError::NoSampler {
        family: family.name(),
    };
    if !family.has_sampler() {
        return Err(no_sampler());
    }
    let mut rng = seed.rng();
    (0..n)
        .map(|_| family.sample(theta, &mut rng).ok_or_else(no_sampler))
        .collect()
}

/// Mean of `s(X, θ)` over `n_draws` draws from `P_θ`, which should vanish
/// for a proper rule.
pub fn check_unbiased_estimating_equation<F>(
    rule: &RuleSpec,
    family: &F,
    theta: &[f64],
    n_draws: usize,
    seed: SeedSpec,
) -> Result<MonteCarloMean>
where
    F: ParametricFamily + ?Sized,
{
    if n_draws < 2 {
        return Err(EstimationError::Specification(
            "need at least two draws for a standard error".into(),
        ));
    }
    let p = theta.len();
    let mut sum = vec![0.0; p];
    let mut sum_sq = vec![0.0; p];
    for x in draw(family, theta, n_draws, seed)? {
        let s = score_gradient(rule, family, &x, theta)?;
        for i in 0..p {
            sum[i] += s[i];
            sum_sq[i] += s[i] * s[i];
        }
    }
    let n = n_draws as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let standard_error = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| ((sq / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt())
        .collect();
    Ok(MonteCarloMean {
        mean,
        standard_error,
        draws: n_draws,
    })
}

/// `IF = −K⁻¹ s`: the first-order shift of the estimate caused by
/// contamination at the point that produced `s`.
pub fn influence_from(k: &Matrix, s: &[f64]) -> Result<Vec<f64>> {
    if s.iter().all(|v| *v == 0.0) {
        return Ok(vec![0.0; s.len()]);
    }
    let k_inv = k.inverse().map_err(|_| EstimationError::Singular("K"))?;
    Ok(k_inv.mul_vec(s)?.into_iter().map(|v| -v).collect())
}

/// Influence function at `x`, with `K(θ)` taken as a model expectation.
pub fn influence_function<F>(rule: &RuleSpec, family: &F, x: &[f64], theta: &[f64]) -> Result<Vec<f64>>
where
    F: ParametricFamily + ?Sized,
{
    let s = score_gradient(rule, family, x, theta)?;
    if s.iter().all(|v| *v == 0.0) {
        return Ok(s);
    }
    let (_, k) = model_based_jk(rule, family, theta)?;
    influence_from(&k, &s)
}

/// Monte Carlo estimate of `G(θ)⁻¹ = E{IF IFᵀ}`. `K` is a model expectation
/// where the family allows quadrature and a Monte Carlo average otherwise.
pub fn sandwich_from_if<F>(
    rule: &RuleSpec,
    family: &F,
    theta: &[f64],
    n_draws: usize,
    seed: SeedSpec,
) -> Result<Matrix>
where
    F: ParametricFamily + ?Sized,
{
    let p = theta.len();
    let xs = draw(family, theta, n_draws, seed)?;
    let scores = xs
        .iter()
        .map(|x| score_gradient(rule, family, x, theta))
        .collect::<Result<Vec<_>>>()?;
    if scores.iter().flatten().all(|v| *v == 0.0) {
        return Ok(Matrix::zeros(p, p));
    }
    let k = match model_based_jk(rule, family, theta) {
        Ok((_, k)) => k,
        Err(EstimationError::NoQuadrature { .. }) => {
            let mut k = Matrix::zeros(p, p);
            for x in &xs {
                k = k.add(&score_hessian(rule, family, x, theta)?)?;
            }
            k.scale(1.0 / xs.len() as f64)
        }
        Err(e) => return Err(e),
    };
    let k_inv = k.inverse().map_err(|_| EstimationError::Singular("K"))?;
    let mut acc = Matrix::zeros(p, p);
    for s in &scores {
        let inf = k_inv.mul_vec(s)?;
        acc = acc.add(&Matrix::outer(&inf, &inf))?;
    }
    Ok(acc.scale(1.0 / xs.len() as f64).symmetrized())
}
