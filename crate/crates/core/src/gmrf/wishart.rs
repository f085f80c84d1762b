use serde::Serialize;

use crate::numerics::Matrix;

use super::chain::ChainData;
use super::{GmrfError, Result};

/// Scatter matrix `S = Σ_n y_n y_nᵀ` of `ν` vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct WishartData {
    s: Matrix,
    nu: usize,
}

impl WishartData {
    pub fn new(s: Matrix, nu: usize) -> Result<Self> {
        if !s.is_square() || s.rows() == 0 {
            return Err(GmrfError::InvalidData(format!(
                "S must be a non-empty square matrix, got {}×{}",
                s.rows(),
                s.cols()
            )));
        }
        if s.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(GmrfError::InvalidData("S has non-finite entries".into()));
        }
        s.check_symmetric(1e-10)?;
        if nu == 0 {
            return Err(GmrfError::InvalidData("ν must be positive".into()));
        }
        Ok(Self { s, nu })
    }

    /// Build `S` from raw vectors. Each entry is summed over the products
    /// sorted by value, so the result does not depend on the order of the
    /// vectors.
    pub fn from_chain(data: &ChainData) -> Result<Self> {
        let n = data.sites();
        let mut s = Matrix::zeros(n, n);
        let mut products = Vec::with_capacity(data.replicates());
        for i in 0..n {
            for j in i..n {
                products.clear();
                products.extend(data.vectors().iter().map(|y| y[i] * y[j]));
                products.sort_by(f64::total_cmp);
                let total: f64 = products.iter().sum();
                s[(i, j)] = total;
                s[(j, i)] = total;
            }
        }
        Self::new(s, data.replicates())
    }

    pub fn scatter(&self) -> &Matrix {
        &self.s
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn sites(&self) -> usize {
        self.s.rows()
    }

    /// `ν − N − 1`, after checking that it is positive.
    fn multiplier(&self) -> Result<f64> {
        let n = self.sites();
        if self.nu < n {
            return Err(GmrfError::WishartNonexistent { nu: self.nu, n });
        }
        if self.nu < n + 2 {
            return Err(GmrfError::NonPositiveMultiplier { nu: self.nu, n });
        }
        Ok((self.nu - n - 1) as f64)
    }

    fn inverse(&self) -> Result<Matrix> {
        self.s.inverse_spd().map_err(|_| GmrfError::SingularScatter)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum WishartFit {
    Full { phi_hat: Vec<Vec<f64>> },
    Tridiagonal { alpha_hat: f64, beta_hat: f64, in_omega: bool },
}

impl WishartFit {
    /// Tridiagonal fits: `α̂ > 2|β̂|`. Full fits: `Φ̂` positive definite.
    pub fn in_omega(&self) -> bool {
        match self {
            WishartFit::Tridiagonal { in_omega, .. } => *in_omega,
            WishartFit::Full { phi_hat } => Matrix::from_rows(phi_hat)
                .ok()
                .is_some_and(|m| m.cholesky().is_ok()),
        }
    }
}

/// Minimiser of `Σ_{i,j} {(ν−N−1) s^{ij} − φ_ij}²`, where `s^{ij}` are the
/// entries of `S⁻¹`. Unrestricted this is `Φ̂ = (ν−N−1) S⁻¹`; over
/// tridiagonal `Φ` it is the diagonal and first-off-diagonal means of
/// `(ν−N−1) S⁻¹`.
pub fn wishart_hyvarinen_estimate(data: &WishartData, restrict_tridiagonal: bool) -> Result<WishartFit> {
    let c = data.multiplier()?;
    let s_inv = data.inverse()?;
    let n = data.sites();
    if !restrict_tridiagonal {
        return Ok(WishartFit::Full {
            phi_hat: s_inv.scale(c).to_rows(),
        });
    }
    let alpha_hat = c * (0..n).map(|i| s_inv[(i, i)]).sum::<f64>() / n as f64;
    let beta_hat = if n > 1 {
        c * (0..n - 1).map(|i| s_inv[(i, i + 1)]).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    Ok(WishartFit::Tridiagonal {
        alpha_hat,
        beta_hat,
        in_omega: alpha_hat > 2.0 * beta_hat.abs(),
    })
}

/// The criterion itself at a given `Φ`, summed over all ordered pairs.
pub fn wishart_criterion(data: &WishartData, phi: &Matrix) -> Result<f64> {
    let c = data.multiplier()?;
    let s_inv = data.inverse()?;
    if phi.rows() != data.sites() || phi.cols() != data.sites() {
        return Err(GmrfError::InvalidData(format!(
            "Φ is {}×{} but S is {n}×{n}",
            phi.rows(),
            phi.cols(),
            n = data.sites()
        )));
    }
    Ok(s_inv
        .as_slice()
        .iter()
        .zip(phi.as_slice())
        .map(|(s, p)| (c * s - p).powi(2))
        .sum())
}
