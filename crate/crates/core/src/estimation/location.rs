use std::f64::consts::PI;

use rand::RngCore;
use rand_distr::{Distribution, Open01, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::numerics::Grid1D;
use crate::scores::{DensityModel, RuleSpec};

use super::{EstimationError, Member, ParamBox, ParametricFamily, Result};

/// Standardised shape `f` of a location family `p_θ(x) = f((x − θ)/s)/s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LocationShape {
    Normal,
    Logistic,
    Cauchy,
    /// Gumbel (extreme value) density `exp(−u − e^{−u})`.
    Gumbel,
}

impl LocationShape {
    pub const ALL: [LocationShape; 4] = [
        LocationShape::Normal,
        LocationShape::Logistic,
        LocationShape::Cauchy,
        LocationShape::Gumbel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LocationShape::Normal => "normal",
            LocationShape::Logistic => "logistic",
            LocationShape::Cauchy => "cauchy",
            LocationShape::Gumbel => "gumbel",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let key = name.trim().to_ascii_lowercase();
        let key = if key == "extreme-value" || key == "extreme_value" {
            "gumbel".to_string()
        } else {
            key
        };
        Self::ALL.iter().copied().find(|s| s.name() == key)
    }

    pub fn log_f(self, u: f64) -> f64 {
        match self {
            LocationShape::Normal => -0.5 * u * u - 0.5 * (2.0 * PI).ln(),
            LocationShape::Logistic => -u.abs() - 2.0 * (-u.abs()).exp().ln_1p(),
            LocationShape::Cauchy => -PI.ln() - (u * u).ln_1p(),
            LocationShape::Gumbel => -u - (-u).exp(),
        }
    }

    pub fn f(self, u: f64) -> f64 {
        self.log_f(u).exp()
    }

    /// `(ln f)′(u)`.
    pub fn dlog_f(self, u: f64) -> f64 {
        match self {
            LocationShape::Normal => -u,
            LocationShape::Logistic => -(0.5 * u).tanh(),
            LocationShape::Cauchy => -2.0 * u / (1.0 + u * u),
            LocationShape::Gumbel => (-u).exp() - 1.0,
        }
    }

    /// `(ln f)″(u)`.
    pub fn d2log_f(self, u: f64) -> f64 {
        match self {
            LocationShape::Normal => -1.0,
            LocationShape::Logistic => {
                let c = (0.5 * u).cosh();
                -0.5 / (c * c)
            }
            LocationShape::Cauchy => {
                let d = 1.0 + u * u;
                -2.0 * (1.0 - u * u) / (d * d)
            }
            LocationShape::Gumbel => -(-u).exp(),
        }
    }

    fn log_abs_dlog_f(self, u: f64) -> f64 {
        match self {
            LocationShape::Gumbel if u < 0.0 => -u + (-u.exp()).ln_1p(),
            LocationShape::Gumbel => (-(-u).exp()).ln_1p(),
            _ => self.dlog_f(u).abs().ln(),
        }
    }

    /// `f′(u)`, computed in log space so that it underflows to zero in the
    /// tails instead of producing `0·∞`.
    pub fn f_prime(self, u: f64) -> f64 {
        let d = self.dlog_f(u);
        if d == 0.0 {
            return 0.0;
        }
        d.signum() * (self.log_f(u) + self.log_abs_dlog_f(u)).exp()
    }

    /// `∫ f(u)^γ du` in closed form.
    pub fn power_integral(self, gamma: f64) -> f64 {
        match self {
            LocationShape::Normal => (2.0 * PI).powf(0.5 * (1.0 - gamma)) / gamma.sqrt(),
            LocationShape::Logistic => (2.0 * ln_gamma(gamma) - ln_gamma(2.0 * gamma)).exp(),
            LocationShape::Cauchy => {
                (-gamma * PI.ln() + 0.5 * PI.ln() + ln_gamma(gamma - 0.5) - ln_gamma(gamma)).exp()
            }
            LocationShape::Gumbel => (ln_gamma(gamma) - gamma * gamma.ln()).exp(),
        }
    }

    /// Inverse distribution function; `None` for the normal, whose sampler
    /// does not need it.
    pub fn quantile(self, p: f64) -> Option<f64> {
        match self {
            LocationShape::Normal => None,
            LocationShape::Logistic => Some((p / (1.0 - p)).ln()),
            LocationShape::Cauchy => Some((PI * (p - 0.5)).tan()),
            LocationShape::Gumbel => Some(-(-p.ln()).ln()),
        }
    }

    pub fn sample_standard(self, rng: &mut dyn RngCore) -> f64 {
        match self {
            LocationShape::Normal => StandardNormal.sample(rng),
            other => {
                let p: f64 = Open01.sample(rng);
                other.quantile(p).expect("closed-form quantile")
            }
        }
    }

    /// Quadrature range, in standard units, carrying all but a negligible
    /// amount of mass; the Cauchy tails are too heavy for a finite grid.
    fn domain(self) -> Option<(f64, f64, usize)> {
        match self {
            LocationShape::Normal => Some((-8.0, 8.0, 1601)),
            LocationShape::Logistic => Some((-40.0, 40.0, 4001)),
            LocationShape::Cauchy => None,
            LocationShape::Gumbel => Some((-5.0, 40.0, 4501)),
        }
    }
}

/// Location family `{f((x − θ)/s)/s : θ ∈ ℝ}` with known scale `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocationFamily {
    shape: LocationShape,
    scale: f64,
}

impl LocationFamily {
    pub fn new(shape: LocationShape, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(EstimationError::Specification(format!(
                "location scale must be positive, got {scale}"
            )));
        }
        Ok(Self { shape, scale })
    }

    pub fn normal(scale: f64) -> Self {
        Self::new(LocationShape::Normal, scale).expect("positive scale")
    }

    pub fn shape(&self) -> LocationShape {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Density and `(ln p_θ)′` at residual `u = x − θ`.
    fn density_and_dlog(&self, u: f64) -> (f64, f64) {
        let z = u / self.scale;
        (self.shape.f(z) / self.scale, self.shape.dlog_f(z) / self.scale)
    }
}

impl ParametricFamily for LocationFamily {
    fn name(&self) -> String {
        format!("{}-location(scale={})", self.shape.name(), self.scale)
    }

    fn dimension(&self) -> usize {
        1
    }

    fn theta_domain(&self) -> ParamBox {
        ParamBox::unbounded(1)
    }

    fn member(&self, theta: &[f64]) -> Result<Member> {
        let (shape, s, t) = (self.shape, self.scale, theta[0]);
        if shape == LocationShape::Normal {
            return Ok(Member::Density(DensityModel::normal(t, s)));
        }
        let mut model = DensityModel::new(1, move |x: &[f64]| shape.log_f((x[0] - t) / s) - s.ln())
            .with_gradient(move |x: &[f64]| vec![shape.dlog_f((x[0] - t) / s) / s])
            .with_laplacian(move |x: &[f64]| shape.d2log_f((x[0] - t) / s) / (s * s))
            .with_power_integral(move |g| s.powf(1.0 - g) * shape.power_integral(g))
            .normalized(true);
        if let Some((lo, hi, points)) = shape.domain() {
            model = model.with_domain(Grid1D::new(t + lo * s, t + hi * s, points)?);
        }
        Ok(Member::Density(model))
    }

    fn analytic_score_gradient(&self, rule: &RuleSpec, x: &[f64], theta: &[f64]) -> Option<Vec<f64>> {
        let (f, dlog) = self.density_and_dlog(x[0] - theta[0]);
        // s = ψ″(f(u)) f′(u) with f′ = f·(ln f)′; the log score is the case ψ″(t) = 1/t.
        let s = match rule {
            RuleSpec::Log => dlog,
            RuleSpec::Brier => f * dlog,
            RuleSpec::Tsallis { gamma } => {
                if f == 0.0 {
                    0.0
                } else {
                    gamma * (gamma - 1.0) * f.powf(gamma - 1.0) * dlog
                }
            }
            RuleSpec::Bregman { psi } => {
                if f == 0.0 {
                    0.0
                } else {
                    psi.second_derivative(f) * f * dlog
                }
            }
            _ => return None,
        };
        Some(vec![s])
    }

    fn sample(&self, theta: &[f64], rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        Some(vec![theta[0] + self.scale * self.shape.sample_standard(rng)])
    }

    fn has_sampler(&self) -> bool {
        true
    }

    fn initial_guess(&self, data: &[Vec<f64>]) -> Vec<f64> {
        let mut xs: Vec<f64> = data.iter().map(|x| x[0]).collect();
        xs.sort_by(f64::total_cmp);
        let n = xs.len();
        if n == 0 {
            return vec![0.0];
        }
        let median = if n % 2 == 1 {
            xs[n / 2]
        } else {
            0.5 * (xs[n / 2 - 1] + xs[n / 2])
        };
        vec![median]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use crate::numerics::{finite_diff_gradient, integrate};

    #[test]
    fn derivatives_match_finite_differences() {
        for shape in LocationShape::ALL {
            for u in [-3.0, -0.7, 0.0, 0.4, 2.5] {
                let d = finite_diff_gradient(|x| shape.log_f(x[0]), &[u], 1e-5).unwrap()[0];
                assert_abs_diff_eq!(shape.dlog_f(u), d, epsilon = 1e-8);
                let d2 = finite_diff_gradient(|x| shape.dlog_f(x[0]), &[u], 1e-5).unwrap()[0];
                assert_abs_diff_eq!(shape.d2log_f(u), d2, epsilon = 1e-8);
                let fp = finite_diff_gradient(|x| shape.f(x[0]), &[u], 1e-5).unwrap()[0];
                assert_abs_diff_eq!(shape.f_prime(u), fp, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn densities_integrate_to_one_and_power_integrals_agree() {
        for shape in LocationShape::ALL {
            let Some((lo, hi, points)) = shape.domain() else { continue };
            let grid = Grid1D::new(lo, hi, points).unwrap();
            assert_abs_diff_eq!(integrate(|u| shape.f(u), &grid).unwrap(), 1.0, epsilon = 1e-8);
            for g in [1.5, 2.0, 3.0] {
                let q = integrate(|u| shape.f(u).powf(g), &grid).unwrap();
                assert_abs_diff_eq!(shape.power_integral(g), q, epsilon = 1e-8);
            }
        }
        // Cauchy: ∫f² = 1/(2π)
        assert_abs_diff_eq!(LocationShape::Cauchy.power_integral(2.0), 0.5 / PI, epsilon = 1e-14);
    }

    #[test]
    fn tails_do_not_produce_nan() {
        for shape in LocationShape::ALL {
            for u in [-1e4, -800.0, 800.0, 1e4] {
                assert!(shape.f_prime(u).is_finite(), "{shape:?} at {u}");
            }
        }
    }

    #[test]
    fn quantiles_invert_cdfs() {
        assert_abs_diff_eq!(LocationShape::Logistic.quantile(0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(LocationShape::Cauchy.quantile(0.75).unwrap(), 1.0, epsilon = 1e-12);
        // Gumbel cdf exp(−e^{−u})
        let u = LocationShape::Gumbel.quantile(0.3).unwrap();
        assert_abs_diff_eq!((-(-u).exp()).exp(), 0.3, epsilon = 1e-14);
    }

    #[test]
    fn log_gradient_example() {
        let fam = LocationFamily::normal(1.0);
        let s = fam.analytic_score_gradient(&RuleSpec::Log, &[2.0], &[0.0]).unwrap();
        assert_eq!(s, vec![-2.0]);
    }
}
