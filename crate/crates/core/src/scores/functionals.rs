use crate::numerics::integrate;

use super::{JointDiscrete, Quote, Result, RuleSpec, ScoreError};

/// `S(P, Q) = E_{X∼P} S(X, Q)`: an exact sum for discrete quotes, quadrature
/// over the domain grid of `P` for one-dimensional densities. Outcomes with
/// `P(x) = 0` contribute nothing, so an infinite score there is ignored.
pub fn expected_score(rule: &RuleSpec, p: Quote<'_>, q: Quote<'_>) -> Result<f64> {
    match (p, q) {
        (Quote::Discrete(p), Quote::Discrete(q)) => {
            same_size(p.len(), q.len())?;
            let scores = rule.score_vector(q)?;
            Ok(weighted_sum(p.probs(), &scores))
        }
        (Quote::Joint(p), Quote::Joint(q)) => {
            if p.radices() != q.radices() {
                return Err(ScoreError::InvalidDistribution(format!(
                    "joint distributions over {:?} and {:?}",
                    p.radices(),
                    q.radices()
                )));
            }
            let scores = joint_scores(rule, p, q)?;
            Ok(weighted_sum(p.flat().probs(), &scores))
        }
        (Quote::Density(p), Quote::Density(q)) => {
            let grid = p.integration_grid("expected score")?;
            let scorer = rule.density_scorer(q)?;
            let failure = std::cell::RefCell::new(None);
            let value = integrate(
                |x| {
                    let w = p.density(&[x]);
                    if w == 0.0 {
                        return 0.0;
                    }
                    match scorer.score(&[x]) {
                        Ok(s) => w * s,
                        Err(e) => {
                            failure.borrow_mut().get_or_insert(e);
                            0.0
                        }
                    }
                },
                grid,
            );
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            match value {
                Ok(v) => Ok(v),
                // an infinite summand is a result, not a quadrature failure
                Err(crate::numerics::NumericsError::NonFiniteIntegrand { value, .. })
                    if value.is_infinite() =>
                {
                    Ok(value)
                }
                Err(e) => Err(e.into()),
            }
        }
        _ => Err(ScoreError::InvalidDistribution(
            "P and Q are distributions of different kinds".into(),
        )),
    }
}

/// Generalised entropy `H(P) = S(P, P)`.
pub fn entropy(rule: &RuleSpec, p: Quote<'_>) -> Result<f64> {
    expected_score(rule, p, p)
}

/// `D(P, Q) = S(P, Q) − H(P)`.
pub fn divergence(rule: &RuleSpec, p: Quote<'_>, q: Quote<'_>) -> Result<f64> {
    let cross = expected_score(rule, p, q)?;
    let own = entropy(rule, p)?;
    if cross.is_infinite() && own.is_finite() {
        return Ok(cross);
    }
    Ok(cross - own)
}

/// `C(X, U) = H(P_X) − E_U H(P_{X|U})` for a joint over `(x, u)` pairs with
/// `x` as variable 0 and `u` as variable 1. Values of `u` with probability
/// zero are skipped.
pub fn dependence(rule: &RuleSpec, joint: &JointDiscrete) -> Result<f64> {
    if joint.variables() != 2 {
        return Err(ScoreError::InvalidDistribution(format!(
            "dependence needs a joint over two variables, got {}",
            joint.variables()
        )));
    }
    let px = joint.marginal(&[0])?;
    let pu = joint.marginal(&[1])?;
    let marginal_entropy = entropy(rule, Quote::Discrete(px.flat()))?;
    let mut conditional_entropy = 0.0;
    for (u, &w) in pu.flat().probs().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let cond = joint.conditional(0, &[0, u])?;
        conditional_entropy += w * entropy(rule, Quote::Discrete(&cond))?;
    }
    Ok(marginal_entropy - conditional_entropy)
}

fn joint_scores(rule: &RuleSpec, p: &JointDiscrete, q: &JointDiscrete) -> Result<Vec<f64>> {
    match rule {
        RuleSpec::Composite { .. } | RuleSpec::Pseudo { .. } => (0..p.flat().len())
            .map(|i| {
                if p.flat().prob(i) == 0.0 {
                    Ok(0.0)
                } else {
                    rule.score_joint(&q.decode(i), q)
                }
            })
            .collect(),
        _ => rule.score_vector(q.flat()),
    }
}

fn same_size(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(ScoreError::InvalidDistribution(format!(
            "P has {a} outcomes, Q has {b}"
        )))
    }
}

fn weighted_sum(p: &[f64], scores: &[f64]) -> f64 {
    p.iter()
        .zip(scores)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, s)| w * s)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::{ConvexFn, DensityModel, DiscreteDistribution};
    use approx::assert_abs_diff_eq;

    fn d(p: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::from_probs(p.to_vec()).unwrap()
    }

    #[test]
    fn documented_values() {
        let half = d(&[0.5, 0.5]);
        let q = d(&[0.25, 0.75]);
        let log = RuleSpec::Log;
        let oracle: f64 = -(0.5 * 0.25f64.ln() + 0.5 * 0.75f64.ln());
        let got = expected_score(&log, Quote::Discrete(&half), Quote::Discrete(&q)).unwrap();
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-14);
        assert_abs_diff_eq!(got, 0.8370, epsilon = 1e-4);
        let kl = divergence(&log, Quote::Discrete(&half), Quote::Discrete(&q)).unwrap();
        assert_abs_diff_eq!(kl, 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(kl, 0.1438, epsilon = 1e-4);

        assert_abs_diff_eq!(entropy(&log, Quote::Discrete(&half)).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(entropy(&RuleSpec::Brier, Quote::Discrete(&half)).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(entropy(&RuleSpec::Brier, Quote::Discrete(&d(&[0.7, 0.3]))).unwrap(), 0.21, epsilon = 1e-15);
        let ts = RuleSpec::tsallis(2.0).unwrap();
        assert_abs_diff_eq!(entropy(&ts, Quote::Discrete(&half)).unwrap(), -0.5, epsilon = 1e-15);
        let dv = divergence(&RuleSpec::Brier, Quote::Discrete(&d(&[0.2, 0.8])), Quote::Discrete(&half)).unwrap();
        assert_abs_diff_eq!(dv, 0.09, epsilon = 1e-15);
    }

    #[test]
    fn zero_weight_infinite_score_is_skipped() {
        let p = d(&[1.0, 0.0]);
        let q = d(&[1.0, 0.0]);
        assert_eq!(entropy(&RuleSpec::Log, Quote::Discrete(&p)).unwrap(), 0.0);
        let bad = d(&[0.0, 1.0]);
        let s = expected_score(&RuleSpec::Log, Quote::Discrete(&p), Quote::Discrete(&bad)).unwrap();
        assert_eq!(s, f64::INFINITY);
        assert_eq!(divergence(&RuleSpec::Log, Quote::Discrete(&p), Quote::Discrete(&bad)).unwrap(), f64::INFINITY);
        assert_eq!(divergence(&RuleSpec::Log, Quote::Discrete(&p), Quote::Discrete(&q)).unwrap(), 0.0);
    }

    #[test]
    fn dependence_examples() {
        let copy = JointDiscrete::new(vec![2, 2], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert_abs_diff_eq!(dependence(&RuleSpec::Log, &copy).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(dependence(&RuleSpec::Brier, &copy).unwrap(), 0.25, epsilon = 1e-15);
        let indep = JointDiscrete::independent(&[d(&[0.3, 0.7]), d(&[0.6, 0.4])]).unwrap();
        assert_abs_diff_eq!(dependence(&RuleSpec::Log, &indep).unwrap(), 0.0, epsilon = 1e-12);
        // a value of u that never occurs is skipped
        let partial = JointDiscrete::new(vec![2, 3], vec![0.25, 0.25, 0.0, 0.25, 0.25, 0.0]).unwrap();
        assert_abs_diff_eq!(dependence(&RuleSpec::Log, &partial).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn continuous_log_entropy_of_normal() {
        let sd: f64 = 1.7;
        let p = DensityModel::normal(0.4, sd);
        let h = entropy(&RuleSpec::Log, Quote::Density(&p)).unwrap();
        let oracle = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * sd * sd).ln();
        assert_abs_diff_eq!(h, oracle, epsilon = 1e-8);
        let q = DensityModel::normal(1.0, 2.0);
        let kl = divergence(&RuleSpec::Log, Quote::Density(&p), Quote::Density(&q)).unwrap();
        let oracle = (2.0f64 / sd).ln() + (sd * sd + 0.36) / 8.0 - 0.5;
        assert_abs_diff_eq!(kl, oracle, epsilon = 1e-8);
        let breg = RuleSpec::bregman(ConvexFn::power(2.0).unwrap()).unwrap();
        assert!(divergence(&breg, Quote::Density(&p), Quote::Density(&q)).unwrap() > 0.0);
    }
}
