use crate::numerics::Matrix;

use super::{ModelSelError, Result};

/// Ingredients of an exponential family `p(x|η) ∝ exp{a(x) + ηᵀt(x)}` that
/// the Hyvärinen score needs: derivatives of `a` and of the natural
/// statistic `t` with respect to `x`.
pub trait ExponentialFamilyTerms {
    fn data_dimension(&self) -> usize;

    fn statistic_dimension(&self) -> usize;

    fn base_gradient(&self, x: &[f64]) -> Vec<f64>;

    fn base_laplacian(&self, x: &[f64]) -> f64;

    /// `J_ij = ∂t_j/∂x_i`, `data_dimension × statistic_dimension`.
    fn statistic_jacobian(&self, x: &[f64]) -> Matrix;

    /// `(Δt_j)_j`.
    fn statistic_laplacians(&self, x: &[f64]) -> Vec<f64>;
}

/// Normal with known variance `σ²` and natural parameter `η = μ/σ²`:
/// `a(x) = −x²/(2σ²)`, `t(x) = x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalMeanTerms {
    pub sigma2: f64,
}

impl ExponentialFamilyTerms for NormalMeanTerms {
    fn data_dimension(&self) -> usize {
        1
    }

    fn statistic_dimension(&self) -> usize {
        1
    }

    fn base_gradient(&self, x: &[f64]) -> Vec<f64> {
        vec![-x[0] / self.sigma2]
    }

    fn base_laplacian(&self, _x: &[f64]) -> f64 {
        -1.0 / self.sigma2
    }

    fn statistic_jacobian(&self, _x: &[f64]) -> Matrix {
        Matrix::identity(1)
    }

    fn statistic_laplacians(&self, _x: &[f64]) -> Vec<f64> {
        vec![0.0]
    }
}

/// Predictive Hyvärinen score when the posterior of the natural parameter
/// has mean `μ` and covariance `Σ`:
/// `Δa + (Δt)ᵀμ + ½|∇a + Jμ|² + tr(JΣJᵀ)`.
pub fn expfam_hyvarinen_score<T>(terms: &T, mu: &[f64], sigma: &Matrix, x0: &[f64]) -> Result<f64>
where
    T: ExponentialFamilyTerms + ?Sized,
{
    let (d, k) = (terms.data_dimension(), terms.statistic_dimension());
    if x0.len() != d || mu.len() != k || sigma.rows() != k || sigma.cols() != k {
        return Err(ModelSelError::DimensionMismatch(format!(
            "x has {} coordinates (expected {d}), μ has {} (expected {k}), Σ is {}×{} (expected {k}×{k})",
            x0.len(),
            mu.len(),
            sigma.rows(),
            sigma.cols()
        )));
    }
    let grad_a = terms.base_gradient(x0);
    let jac = terms.statistic_jacobian(x0);
    let lap_t = terms.statistic_laplacians(x0);
    if grad_a.len() != d || jac.rows() != d || jac.cols() != k || lap_t.len() != k {
        return Err(ModelSelError::DimensionMismatch(
            "exponential-family terms disagree with their declared dimensions".into(),
        ));
    }
    let j_mu = jac.mul_vec(mu)?;
    let drift: f64 = grad_a.iter().zip(&j_mu).map(|(a, b)| (a + b).powi(2)).sum();
    let spread = jac.matmul(sigma)?.matmul(&jac.transpose())?.trace();
    let curvature = terms.base_laplacian(x0) + lap_t.iter().zip(mu).map(|(l, m)| l * m).sum::<f64>();
    Ok(curvature + 0.5 * drift + spread)
}
