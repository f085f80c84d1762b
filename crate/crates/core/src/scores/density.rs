use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::numerics::{
    default_step, finite_diff_gradient_with, finite_diff_laplacian_with, integrate,
    second_order_step, Grid1D, Matrix,
};

use super::{Result, ScoreError};

type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A continuous density `q` on `ℝᵏ`, known through its log-density and
/// optionally its spatial derivatives.
///
/// The log-density is stored as a kernel plus an additive constant
/// (`log q = kernel + log_scale`). Only the kernel is differentiated, so
/// rescaling the density with [`DensityModel::shifted`] leaves every
/// derivative, and hence every homogeneous score, bit-for-bit unchanged.
#[derive(Clone)]
pub struct DensityModel {
    log_kernel: PointFn,
    log_scale: f64,
    gradient: Option<VectorFn>,
    laplacian: Option<PointFn>,
    dimension: usize,
    normalized: bool,
    domain: Option<Grid1D>,
    power_integral: Option<ScalarFn>,
}

impl fmt::Debug for DensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityModel")
            .field("dimension", &self.dimension)
            .field("normalized", &self.normalized)
            .field("log_scale", &self.log_scale)
            .field("analytic_gradient", &self.gradient.is_some())
            .field("analytic_laplacian", &self.laplacian.is_some())
            .field("domain", &self.domain)
            .finish()
    }
}

impl DensityModel {
    /// Unnormalized density with log-kernel `log_density` on `ℝ^dimension`.
    pub fn new<F>(dimension: usize, log_density: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            log_kernel: Arc::new(log_density),
            log_scale: 0.0,
            gradient: None,
            laplacian: None,
            dimension,
            normalized: false,
            domain: None,
            power_integral: None,
        }
    }

    pub fn with_gradient<F>(mut self, gradient: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn with_laplacian<F>(mut self, laplacian: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.laplacian = Some(Arc::new(laplacian));
        self
    }

    pub fn normalized(mut self, normalized: bool) -> Self {
        self.normalized = normalized;
        self
    }

    /// Integration grid used by rules that integrate over the sample space.
    pub fn with_domain(mut self, grid: Grid1D) -> Self {
        self.domain = Some(grid);
        self
    }

    /// Closed form of `γ ↦ ∫ q(y)^γ dy`, used instead of quadrature.
    pub fn with_power_integral<F>(mut self, power_integral: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.power_integral = Some(Arc::new(power_integral));
        self
    }

    /// The same density multiplied by `e^c`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.log_scale += c;
        if c != 0.0 {
            out.normalized = false;
            out.power_integral = None;
        }
        out
    }

    /// Normal density on the line.
    pub fn normal(mean: f64, sd: f64) -> Self {
        let var = sd * sd;
        let log_norm = -0.5 * (2.0 * PI * var).ln();
        Self::new(1, move |x| log_norm - 0.5 * (x[0] - mean).powi(2) / var)
            .with_gradient(move |x| vec![-(x[0] - mean) / var])
            .with_laplacian(move |_| -1.0 / var)
            .normalized(true)
            .with_domain(Grid1D::centered(mean, sd, 8.0, 1601).expect("positive sd"))
            .with_power_integral(move |g| (2.0 * PI * var).powf(0.5 * (1.0 - g)) / g.sqrt())
    }

    /// Finite mixture of normals on the line, with analytic derivatives.
    pub fn normal_mixture(weights: &[f64], means: &[f64], sds: &[f64]) -> Self {
        let comps: Arc<Vec<(f64, f64, f64)>> = Arc::new(
            weights
                .iter()
                .zip(means)
                .zip(sds)
                .map(|((w, m), s)| (*w, *m, *s))
                .collect(),
        );
        // derivatives of log q from the component densities
        let parts = {
            let comps = Arc::clone(&comps);
            move |x: f64| -> (f64, f64, f64) {
                let (mut q, mut dq, mut d2q) = (0.0, 0.0, 0.0);
                for &(w, m, s) in comps.iter() {
                    let z = (x - m) / s;
                    let phi = w * (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * s);
                    q += phi;
                    dq += -z / s * phi;
                    d2q += (z * z - 1.0) / (s * s) * phi;
                }
                (q, dq, d2q)
            }
        };
        let lo = means
            .iter()
            .zip(sds)
            .map(|(m, s)| m - 8.0 * s)
            .fold(f64::INFINITY, f64::min);
        let hi = means
            .iter()
            .zip(sds)
            .map(|(m, s)| m + 8.0 * s)
            .fold(f64::NEG_INFINITY, f64::max);
        let p1 = parts.clone();
        let p2 = parts.clone();
        let p3 = parts;
        Self::new(1, move |x| p1(x[0]).0.ln())
            .with_gradient(move |x| {
                let (q, dq, _) = p2(x[0]);
                vec![dq / q]
            })
            .with_laplacian(move |x| {
                let (q, dq, d2q) = p3(x[0]);
                d2q / q - (dq / q).powi(2)
            })
            .normalized(true)
            .with_domain(Grid1D::new(lo, hi, 2001).expect("finite mixture range"))
    }

    /// Gaussian with the given mean and precision matrix. A singular
    /// precision is allowed; the result is then an unnormalized kernel.
    pub fn gaussian_precision(mean: Vec<f64>, precision: Matrix) -> Self {
        let k = mean.len();
        let log_norm = precision
            .cholesky()
            .ok()
            .map(|c| 0.5 * c.log_determinant() - 0.5 * k as f64 * (2.0 * PI).ln());
        let trace = precision.trace();
        let phi = Arc::new(precision);
        let m = Arc::new(mean);
        let (phi1, m1) = (Arc::clone(&phi), Arc::clone(&m));
        let (phi2, m2) = (Arc::clone(&phi), Arc::clone(&m));
        let c = log_norm.unwrap_or(0.0);
        Self::new(k, move |x| {
            let r: Vec<f64> = x.iter().zip(m1.iter()).map(|(a, b)| a - b).collect();
            let pr = phi1.mul_vec(&r).expect("dimension checked by caller");
            c - 0.5 * r.iter().zip(&pr).map(|(a, b)| a * b).sum::<f64>()
        })
        .with_gradient(move |x| {
            let r: Vec<f64> = x.iter().zip(m2.iter()).map(|(a, b)| a - b).collect();
            phi2.mul_vec(&r)
                .expect("dimension checked by caller")
                .into_iter()
                .map(|v| -v)
                .collect()
        })
        .with_laplacian(move |_| -trace)
        .normalized(log_norm.is_some())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn domain(&self) -> Option<&Grid1D> {
        self.domain.as_ref()
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn has_analytic_laplacian(&self) -> bool {
        self.laplacian.is_some()
    }

    /// Drop analytic derivatives so evaluation falls back to finite differences.
    pub fn without_derivatives(&self) -> Self {
        let mut out = self.clone();
        out.gradient = None;
        out.laplacian = None;
        out
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        (self.log_kernel)(x) + self.log_scale
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.dimension {
            Ok(())
        } else {
            Err(ScoreError::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            })
        }
    }

    /// `∇ log q(x)`, analytic when supplied, else central differences.
    pub fn gradient_log_density(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        match &self.gradient {
            Some(g) => Ok(g(x)),
            None => Ok(finite_diff_gradient_with(|y| (self.log_kernel)(y), x, default_step)?),
        }
    }

    /// `Δ log q(x)`, analytic when supplied, else a second-difference stencil.
    pub fn laplacian_log_density(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        match &self.laplacian {
            Some(l) => Ok(l(x)),
            None => Ok(finite_diff_laplacian_with(
                |y| (self.log_kernel)(y),
                x,
                second_order_step,
            )?),
        }
    }

    /// `∫ q^γ` over the line, from the closed form when available.
    pub(crate) fn power_integral(&self, gamma: f64, rule: &str) -> Result<f64> {
        if let Some(pi) = &self.power_integral {
            return Ok(pi(gamma));
        }
        let grid = self.integration_grid(rule)?;
        Ok(integrate(|y| ((gamma) * self.log_density(&[y])).exp(), grid)?)
    }

    pub(crate) fn integration_grid(&self, rule: &str) -> Result<&Grid1D> {
        if self.dimension != 1 {
            return Err(ScoreError::NotApplicable {
                rule: rule.to_string(),
                target: "multivariate density (integral terms are one-dimensional)",
            });
        }
        self.domain.as_ref().ok_or_else(|| ScoreError::MissingGrid {
            rule: rule.to_string(),
        })
    }

    /// Check analytic derivatives against finite differences at `points`,
    /// within `max(1e-4, 1e-3·|value|)`.
    pub fn check_derivatives(&self, points: &[Vec<f64>]) -> Result<()> {
        let fd = self.without_derivatives();
        for x in points {
            if self.gradient.is_some() {
                let a = self.gradient_log_density(x)?;
                let b = fd.gradient_log_density(x)?;
                for (u, v) in a.iter().zip(&b) {
                    if (u - v).abs() > 1e-4f64.max(1e-3 * u.abs()) {
                        return Err(ScoreError::Specification(format!(
                            "analytic gradient {u} disagrees with finite differences {v} at {x:?}"
                        )));
                    }
                }
            }
            if self.laplacian.is_some() {
                let a = self.laplacian_log_density(x)?;
                let b = fd.laplacian_log_density(x)?;
                if (a - b).abs() > 1e-4f64.max(1e-3 * a.abs()) {
                    return Err(ScoreError::Specification(format!(
                        "analytic Laplacian {a} disagrees with finite differences {b} at {x:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Quadrature of `q` over the declared domain; must be 1 within 1e-6 for
    /// densities flagged as normalized.
    pub fn check_normalization(&self) -> Result<f64> {
        let grid = self.integration_grid("normalization check")?;
        let mass = integrate(|y| self.density(&[y]), grid)?;
        if self.normalized && (mass - 1.0).abs() > 1e-6 {
            return Err(ScoreError::InvalidDistribution(format!(
                "density flagged normalized integrates to {mass}"
            )));
        }
        Ok(mass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normal_and_mixture_derivatives_match_finite_differences() {
        let pts: Vec<Vec<f64>> = (-20..=20).map(|i| vec![i as f64 * 0.3]).collect();
        DensityModel::normal(0.4, 1.7).check_derivatives(&pts).unwrap();
        DensityModel::normal_mixture(&[0.3, 0.7], &[-1.0, 2.0], &[0.5, 1.2])
            .check_derivatives(&pts)
            .unwrap();
    }

    #[test]
    fn normalization() {
        assert_abs_diff_eq!(
            DensityModel::normal(1.0, 2.0).check_normalization().unwrap(),
            1.0,
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(
            DensityModel::normal_mixture(&[0.5, 0.5], &[-3.0, 3.0], &[1.0, 0.5])
                .check_normalization()
                .unwrap(),
            1.0,
            epsilon = 1e-8
        );
        let bad = DensityModel::new(1, |x| -0.5 * x[0] * x[0])
            .normalized(true)
            .with_domain(Grid1D::new(-8.0, 8.0, 801).unwrap());
        assert!(bad.check_normalization().is_err());
    }

    #[test]
    fn wrong_analytic_gradient_is_caught() {
        let m = DensityModel::new(1, |x| -0.5 * x[0] * x[0]).with_gradient(|x| vec![x[0]]);
        assert!(m.check_derivatives(&[vec![1.0]]).is_err());
    }

    #[test]
    fn power_integral_closed_form_matches_quadrature() {
        let m = DensityModel::normal(0.0, 1.3);
        let closed = m.power_integral(2.5, "test").unwrap();
        let mut quad = m.clone();
        quad.power_integral = None;
        let numeric = quad.power_integral(2.5, "test").unwrap();
        assert_abs_diff_eq!(closed, numeric, epsilon = 1e-10);
    }
}
