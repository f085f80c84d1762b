use rand::RngCore;

use crate::estimation::{self, EstimationError, Member, ParamBox, ParametricFamily};
use crate::scores::{self, DensityModel, FullConditionals, RuleSpec};

use super::chain::{draw_chain, neighbour_sums, TridiagonalModel};

/// Full conditionals of the chain: `Y_i | rest ∼ N(λ z_i, 1/α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianChainConditionals {
    pub model: TridiagonalModel,
}

impl GaussianChainConditionals {
    pub fn new(model: TridiagonalModel) -> Self {
        Self { model }
    }
}

impl FullConditionals for GaussianChainConditionals {
    type State = f64;

    fn sites(&self) -> usize {
        self.model.n
    }

    fn site_score(&self, rule: &RuleSpec, site: usize, config: &[f64]) -> scores::Result<f64> {
        if !(self.model.alpha > 0.0) {
            return Err(scores::ScoreError::Specification(format!(
                "conditional variance 1/α needs α > 0, got {}",
                self.model.alpha
            )));
        }
        let left = if site > 0 { config[site - 1] } else { 0.0 };
        let right = config.get(site + 1).copied().unwrap_or(0.0);
        let q = DensityModel::normal(self.model.lambda() * (left + right), self.model.alpha.sqrt().recip());
        rule.score_density(&config[site..=site], &q)
    }
}

/// The chain model as a parametric family in `θ = (α, β)` with `α > 0`.
/// An observation is a whole vector of length `N`. Members outside Ω are
/// unnormalized kernels, which is enough for the Hyvärinen score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TridiagonalFamily {
    pub n: usize,
}

impl TridiagonalFamily {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    fn model(&self, theta: &[f64]) -> Option<TridiagonalModel> {
        match theta {
            [a, b] => TridiagonalModel::new(*a, *b, self.n).ok(),
            _ => None,
        }
    }
}

impl ParametricFamily for TridiagonalFamily {
    fn name(&self) -> String {
        format!("tridiagonal-gaussian(N={})", self.n)
    }

    fn dimension(&self) -> usize {
        2
    }

    fn theta_domain(&self) -> ParamBox {
        ParamBox::new(vec![0.0, f64::NEG_INFINITY], vec![f64::INFINITY, f64::INFINITY])
            .expect("static box")
    }

    fn member(&self, theta: &[f64]) -> estimation::Result<Member> {
        let model = self.model(theta).ok_or_else(|| EstimationError::OutsideDomain {
            theta: theta.to_vec(),
        })?;
        Ok(Member::Density(DensityModel::gaussian_precision(
            vec![0.0; self.n],
            model.precision_matrix(),
        )))
    }

    /// For the Hyvärinen score `S = −Nα + ½Σ(αy + βz)²`.
    fn analytic_score_gradient(&self, rule: &RuleSpec, x: &[f64], theta: &[f64]) -> Option<Vec<f64>> {
        if !matches!(rule, RuleSpec::Hyvarinen) || x.len() != self.n {
            return None;
        }
        let model = self.model(theta)?;
        let (mut da, mut db) = (-(self.n as f64), 0.0);
        for (yi, zi) in x.iter().zip(neighbour_sums(x)) {
            let r = model.alpha * yi + model.beta * zi;
            da += r * yi;
            db += r * zi;
        }
        Some(vec![da, db])
    }

    fn sample(&self, theta: &[f64], rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let model = self.model(theta).filter(|m| m.in_omega())?;
        Some(draw_chain(&model, rng))
    }

    fn has_sampler(&self) -> bool {
        true
    }

    /// The independence fit `α = νN / Σ y²`, `β = 0`, which lies in Ω.
    fn initial_guess(&self, data: &[Vec<f64>]) -> Vec<f64> {
        let ss: f64 = data.iter().flatten().map(|v| v * v).sum();
        let count = data.iter().map(Vec::len).sum::<usize>() as f64;
        let alpha = if ss > 0.0 { count / ss } else { 1.0 };
        vec![alpha, 0.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{minimum_score_estimate, score_gradient};
    use crate::gmrf::{hyvarinen_closed_form, hyvarinen_objective, pseudo_loglik, ChainData};
    use crate::numerics::finite_diff_gradient;
    use crate::scores::{evaluate_score, pseudo_score, Observation, Quote};
    use approx::assert_abs_diff_eq;

    #[test]
    fn objective_is_the_generic_hyvarinen_score() {
        let y = vec![0.5, -1.0, 2.0, 0.25];
        let data = ChainData::single(y.clone()).unwrap();
        // one model inside Ω and one outside
        for (a, b) in [(2.0, 0.7), (1.0, 1.5)] {
            let model = TridiagonalModel::new(a, b, 4).unwrap();
            let Member::Density(q) = TridiagonalFamily::new(4).member(&[a, b]).unwrap() else {
                unreachable!()
            };
            let generic = evaluate_score(&RuleSpec::Hyvarinen, Observation::Point(&y), Quote::Density(&q)).unwrap();
            assert_abs_diff_eq!(generic, hyvarinen_objective(&model, &data), epsilon = 1e-8);
        }
    }

    #[test]
    fn pseudo_score_matches_pseudo_likelihood() {
        let y = vec![0.5, -1.0, 2.0, 0.25, -0.3];
        let data = ChainData::single(y.clone()).unwrap();
        let model = TridiagonalModel::new(1.7, -0.4, 5).unwrap();
        let cond = GaussianChainConditionals::new(model);
        let ps = pseudo_score(&y, &cond, &RuleSpec::Log).unwrap();
        let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert_abs_diff_eq!(-ps + 5.0 * half_log_2pi, pseudo_loglik(&model, &data).unwrap(), epsilon = 1e-9);
    }

    #[test]
    fn analytic_gradient_and_generic_estimator() {
        let fam = TridiagonalFamily::new(3);
        let y = [1.0, -1.0, 2.0];
        let g = score_gradient(&RuleSpec::Hyvarinen, &fam, &y, &[1.3, 0.2]).unwrap();
        let n = finite_diff_gradient(
            |t| hyvarinen_objective(&TridiagonalModel::new(t[0], t[1], 3).unwrap(), &ChainData::single(y.to_vec()).unwrap()),
            &[1.3, 0.2],
            1e-6,
        )
        .unwrap();
        assert_abs_diff_eq!(g[0], n[0], epsilon = 1e-7);
        assert_abs_diff_eq!(g[1], n[1], epsilon = 1e-7);

        let data = vec![vec![0.4, -0.3, 1.1], vec![1.0, 0.5, 0.0], vec![-0.2, 0.9, 0.6]];
        let closed = hyvarinen_closed_form(&ChainData::new(data.clone()).unwrap()).unwrap();
        let fit = minimum_score_estimate(&RuleSpec::Hyvarinen, &fam, &data, None).unwrap();
        assert_abs_diff_eq!(fit.theta_hat[0], closed.alpha_hat, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.theta_hat[1], closed.beta_hat, epsilon = 1e-6);
    }
}
