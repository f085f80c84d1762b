use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::numerics::{minimize, Matrix, SeedSpec};

use super::{GmrfError, Result};

/// Precision `Φ` with `α` on the diagonal and `β` on the first off-diagonals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TridiagonalModel {
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
}

impl TridiagonalModel {
    pub fn new(alpha: f64, beta: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(GmrfError::InvalidData("chain length must be at least 1".into()));
        }
        if !(alpha.is_finite() && beta.is_finite()) {
            return Err(GmrfError::InvalidData(format!(
                "parameters must be finite, got α = {alpha}, β = {beta}"
            )));
        }
        Ok(Self { alpha, beta, n })
    }

    /// `α > 2|β|`, which makes `Φ` positive definite for every `N`.
    pub fn in_omega(&self) -> bool {
        self.alpha > 2.0 * self.beta.abs()
    }

    pub fn check_omega(&self) -> Result<()> {
        if self.in_omega() {
            Ok(())
        } else {
            Err(GmrfError::OutsideOmega {
                alpha: self.alpha,
                beta: self.beta,
            })
        }
    }

    /// `λ = −β/α`, the regression coefficient of `y_i` on `z_i`.
    pub fn lambda(&self) -> f64 {
        -self.beta / self.alpha
    }

    pub fn precision_matrix(&self) -> Matrix {
        let mut phi = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            phi[(i, i)] = self.alpha;
            if i + 1 < self.n {
                phi[(i, i + 1)] = self.beta;
                phi[(i + 1, i)] = self.beta;
            }
        }
        phi
    }

    /// `yᵀΦy`.
    pub fn quadratic_form(&self, y: &[f64]) -> f64 {
        let diag: f64 = y.iter().map(|v| v * v).sum();
        let off: f64 = y.windows(2).map(|w| w[0] * w[1]).sum();
        self.alpha * diag + 2.0 * self.beta * off
    }
}

/// `ln det Φ`. The determinant is `β^N (ρ^{N+1} − ρ^{−(N+1)}) / (ρ − ρ^{−1})`
/// with `ρ + ρ⁻¹ = α/β`; here it is written through the larger root
/// `m = |β|ρ = (α + √(α² − 4β²))/2` and `x = (β/m)² < 1` as
/// `N ln m + ln(1 − x^{N+1}) − ln(1 − x)`, which cannot overflow.
pub fn tridiag_logdet(model: &TridiagonalModel) -> Result<f64> {
    model.check_omega()?;
    let n = model.n as f64;
    if model.beta == 0.0 {
        return Ok(n * model.alpha.ln());
    }
    let (a, b) = (model.alpha, model.beta);
    let m = 0.5 * (a + ((a - 2.0 * b) * (a + 2.0 * b)).sqrt());
    let x = (b / m).powi(2);
    Ok(n * m.ln() + (-x.powf(n + 1.0)).ln_1p() - (-x).ln_1p())
}

/// Observed chains: `ν` vectors of a common length `N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainData {
    vectors: Vec<Vec<f64>>,
}

impl ChainData {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let n = match vectors.first() {
            Some(v) if !v.is_empty() => v.len(),
            Some(_) => return Err(GmrfError::InvalidData("vectors must be non-empty".into())),
            None => return Err(GmrfError::InvalidData("no vectors".into())),
        };
        for (r, v) in vectors.iter().enumerate() {
            if v.len() != n {
                return Err(GmrfError::InvalidData(format!(
                    "vector {r} has length {} but vector 0 has length {n}",
                    v.len()
                )));
            }
            if let Some(c) = v.iter().position(|x| !x.is_finite()) {
                return Err(GmrfError::InvalidData(format!(
                    "vector {r}, entry {c} is not finite"
                )));
            }
        }
        Ok(Self { vectors })
    }

    pub fn single(y: Vec<f64>) -> Result<Self> {
        Self::new(vec![y])
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// `N`, the chain length.
    pub fn sites(&self) -> usize {
        self.vectors[0].len()
    }

    /// `ν`, the number of vectors.
    pub fn replicates(&self) -> usize {
        self.vectors.len()
    }
}

/// `z_i = y_{i−1} + y_{i+1}` with zeros beyond both ends.
pub fn neighbour_sums(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { y[i - 1] } else { 0.0 };
            let right = if i + 1 < n { y[i + 1] } else { 0.0 };
            left + right
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainStatistics {
    pub c_yz: f64,
    pub c_zz: f64,
    pub c_yy: f64,
    /// `c_yy − c_yz²/c_zz`, or `c_yy` when `c_zz = 0`.
    pub c_yy_dot_z: f64,
    /// Set when `c_zz = 0`, so that `λ̂` is undefined.
    pub degenerate: bool,
    pub sites: usize,
    pub replicates: usize,
}

/// The sufficient statistics, summed over all vectors.
pub fn chain_statistics(data: &ChainData) -> ChainStatistics {
    let (mut c_yz, mut c_zz, mut c_yy) = (0.0, 0.0, 0.0);
    for y in data.vectors() {
        for (yi, zi) in y.iter().zip(neighbour_sums(y)) {
            c_yz += yi * zi;
            c_zz += zi * zi;
            c_yy += yi * yi;
        }
    }
    let degenerate = c_zz == 0.0;
    let c_yy_dot_z = if degenerate { c_yy } else { c_yy - c_yz * c_yz / c_zz };
    ChainStatistics {
        c_yz,
        c_zz,
        c_yy,
        c_yy_dot_z,
        degenerate,
        sites: data.sites(),
        replicates: data.replicates(),
    }
}

/// Summed Hyvärinen score `Σ_vectors [−Nα + ½ Σ_i (α y_i + β z_i)²]`, a
/// quadratic in `(α, β)` defined everywhere.
pub fn hyvarinen_objective(model: &TridiagonalModel, data: &ChainData) -> f64 {
    let n = data.sites() as f64;
    data.vectors()
        .iter()
        .map(|y| {
            let sq: f64 = y
                .iter()
                .zip(neighbour_sums(y))
                .map(|(yi, zi)| (model.alpha * yi + model.beta * zi).powi(2))
                .sum();
            -n * model.alpha + 0.5 * sq
        })
        .sum()
}

/// Same quadratic, from the statistics.
fn objective_from_stats(s: &ChainStatistics, alpha: f64, beta: f64) -> f64 {
    let nn = (s.sites * s.replicates) as f64;
    -nn * alpha + 0.5 * (alpha * alpha * s.c_yy + 2.0 * alpha * beta * s.c_yz + beta * beta * s.c_zz)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyvarinenFit {
    /// `None` when `c_zz = 0`; `β̂` is then reported as 0.
    pub lambda_hat: Option<f64>,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub in_omega: bool,
    /// Set when the estimate was moved onto the boundary of Ω by
    /// [`refit_in_omega`].
    pub projected: bool,
}

/// Unconstrained minimiser of the Hyvärinen objective:
/// `λ̂ = c_yz/c_zz`, `α̂ = νN / c_yy.z`, `β̂ = −α̂λ̂`. The result may lie
/// outside Ω; `in_omega` says whether it does.
pub fn hyvarinen_closed_form(data: &ChainData) -> Result<HyvarinenFit> {
    let s = chain_statistics(data);
    if !(s.c_yy_dot_z > 0.0) {
        return Err(GmrfError::Degenerate(format!(
            "c_yy.z = {} must be positive for α̂ to exist",
            s.c_yy_dot_z
        )));
    }
    let alpha_hat = (s.sites * s.replicates) as f64 / s.c_yy_dot_z;
    let lambda_hat = (!s.degenerate).then(|| s.c_yz / s.c_zz);
    let beta_hat = lambda_hat.map_or(0.0, |l| -alpha_hat * l);
    Ok(HyvarinenFit {
        lambda_hat,
        alpha_hat,
        beta_hat,
        in_omega: alpha_hat > 2.0 * beta_hat.abs(),
        projected: false,
    })
}

/// Move an out-of-Ω fit to the best point on `β = ±(α/2 − ε)`. The
/// objective is a convex quadratic, so when its free minimum lies outside Ω
/// the constrained minimum is on one of those two rays, where it has the
/// closed form `α = (νN + sεΣzw) / Σw²` with `w = y + s z/2`.
pub fn refit_in_omega(data: &ChainData, fit: HyvarinenFit, epsilon: f64) -> HyvarinenFit {
    if fit.in_omega {
        return fit;
    }
    let s = chain_statistics(data);
    let nn = (s.sites * s.replicates) as f64;
    let mut best: Option<(f64, f64, f64)> = None;
    for sign in [1.0, -1.0] {
        let zw = s.c_yz + sign * 0.5 * s.c_zz;
        let ww = s.c_yy + sign * s.c_yz + 0.25 * s.c_zz;
        if !(ww > 0.0) {
            continue;
        }
        let alpha = (nn + sign * epsilon * zw) / ww;
        if !(alpha > 2.0 * epsilon) {
            continue;
        }
        let beta = sign * (0.5 * alpha - epsilon);
        let value = objective_from_stats(&s, alpha, beta);
        if best.is_none_or(|(v, _, _)| value < v) {
            best = Some((value, alpha, beta));
        }
    }
    match best {
        Some((_, alpha, beta)) => HyvarinenFit {
            lambda_hat: Some(-beta / alpha),
            alpha_hat: alpha,
            beta_hat: beta,
            in_omega: alpha > 2.0 * beta.abs(),
            projected: true,
        },
        None => fit,
    }
}

/// Log pseudo-likelihood `Σ_vectors [½N ln α − ½α Σ_i (y_i − λ z_i)²]` with
/// `λ = −β/α`, dropping `−½N ln 2π` per vector.
pub fn pseudo_loglik(model: &TridiagonalModel, data: &ChainData) -> Result<f64> {
    if !(model.alpha > 0.0) {
        return Err(GmrfError::NonPositiveAlpha(model.alpha));
    }
    let lambda = model.lambda();
    let n = data.sites() as f64;
    Ok(data
        .vectors()
        .iter()
        .map(|y| {
            let rss: f64 = y
                .iter()
                .zip(neighbour_sums(y))
                .map(|(yi, zi)| (yi - lambda * zi).powi(2))
                .sum();
            0.5 * n * model.alpha.ln() - 0.5 * model.alpha * rss
        })
        .sum())
}

/// `Σ_vectors [−½ ln det Φ + ½ yᵀΦy]`, the negative log-likelihood without
/// the `½N ln 2π` constants.
pub fn exact_neg_loglik(model: &TridiagonalModel, data: &ChainData) -> Result<f64> {
    let logdet = tridiag_logdet(model)?;
    Ok(data
        .vectors()
        .iter()
        .map(|y| -0.5 * logdet + 0.5 * model.quadratic_form(y))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MleFit {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub neg_loglik: f64,
    pub converged: bool,
}

/// Numerical maximum-likelihood estimate over Ω, started from the
/// Hyvärinen estimate when that lies in Ω.
pub fn exact_mle(data: &ChainData) -> Result<MleFit> {
    let n = data.sites();
    let fit = hyvarinen_closed_form(data)?;
    let start = if fit.in_omega {
        [fit.alpha_hat, fit.beta_hat]
    } else {
        // the independence model is always inside Ω
        let s = chain_statistics(data);
        [(n * data.replicates()) as f64 / s.c_yy, 0.0]
    };
    let objective = |t: &[f64]| {
        TridiagonalModel::new(t[0], t[1], n)
            .ok()
            .and_then(|m| exact_neg_loglik(&m, data).ok())
            .unwrap_or(f64::INFINITY)
    };
    let min = minimize(objective, &start, 1e-12)?;
    Ok(MleFit {
        alpha_hat: min.argmin[0],
        beta_hat: min.argmin[1],
        neg_loglik: min.value,
        converged: min.converged,
    })
}

/// One draw `y ∼ N(0, Φ⁻¹)` via the bidiagonal Cholesky factor `Φ = LLᵀ`
/// and the back substitution `Lᵀy = ε`.
pub(crate) fn draw_chain<R: Rng + ?Sized>(model: &TridiagonalModel, rng: &mut R) -> Vec<f64> {
    let n = model.n;
    let mut diag = Vec::with_capacity(n);
    let mut sub = Vec::with_capacity(n.saturating_sub(1));
    let mut d = model.alpha.sqrt();
    diag.push(d);
    for _ in 1..n {
        let l = model.beta / d;
        sub.push(l);
        d = (model.alpha - l * l).sqrt();
        diag.push(d);
    }
    let eps: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut y = vec![0.0; n];
    y[n - 1] = eps[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        y[i] = (eps[i] - sub[i] * y[i + 1]) / diag[i];
    }
    y
}

/// `ν` independent draws from `N(0, Φ⁻¹)`, deterministic in `seed`.
pub fn simulate_chain(model: &TridiagonalModel, nu: usize, seed: SeedSpec) -> Result<ChainData> {
    model.check_omega()?;
    if nu == 0 {
        return Err(GmrfError::InvalidData("need at least one vector".into()));
    }
    let mut rng = seed.rng();
    ChainData::new((0..nu).map(|_| draw_chain(model, &mut rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn example() -> ChainData {
        ChainData::single(vec![1.0, -1.0, 2.0]).unwrap()
    }

    #[test]
    fn logdet_examples() {
        let m = TridiagonalModel::new(2.0, 0.0, 1).unwrap();
        assert_abs_diff_eq!(tridiag_logdet(&m).unwrap(), 2f64.ln(), epsilon = 1e-15);
        let m = TridiagonalModel::new(2.0, 0.5, 3).unwrap();
        assert_abs_diff_eq!(tridiag_logdet(&m).unwrap(), 7f64.ln(), epsilon = 1e-9);
        let m = TridiagonalModel::new(2.0, -0.5, 3).unwrap();
        assert_abs_diff_eq!(tridiag_logdet(&m).unwrap(), 7f64.ln(), epsilon = 1e-9);
        let err = tridiag_logdet(&TridiagonalModel::new(1.0, 0.5, 3).unwrap()).unwrap_err();
        assert!(err.to_string().contains("α > 2|β|"));
    }

    #[test]
    fn logdet_matches_the_determinant_recurrence() {
        // D_k = α D_{k−1} − β² D_{k−2}
        for (a, b) in [(3.0, 1.2), (1.0, -0.49), (10.0, 0.1)] {
            let (mut prev, mut cur) = (1.0f64, a);
            for n in 1..=30usize {
                let m = TridiagonalModel::new(a, b, n).unwrap();
                let got = tridiag_logdet(&m).unwrap();
                assert!((got - cur.ln()).abs() <= 1e-10 * cur.ln().abs().max(1.0), "{a} {b} {n}");
                let next = a * cur - b * b * prev;
                prev = cur;
                cur = next;
            }
        }
    }

    #[test]
    fn statistics_of_the_worked_example() {
        let s = chain_statistics(&example());
        assert_eq!(neighbour_sums(&[1.0, -1.0, 2.0]), vec![-1.0, 3.0, -1.0]);
        assert_eq!((s.c_yz, s.c_zz, s.c_yy), (-6.0, 11.0, 6.0));
        assert_abs_diff_eq!(s.c_yy_dot_z, 30.0 / 11.0, epsilon = 1e-15);
        assert!(!s.degenerate);

        let zero = chain_statistics(&ChainData::single(vec![0.0; 4]).unwrap());
        assert_eq!((zero.c_yz, zero.c_zz, zero.c_yy, zero.c_yy_dot_z), (0.0, 0.0, 0.0, 0.0));
        assert!(zero.degenerate);

        let y = vec![0.3, -1.2, 0.7, 2.0];
        let one = chain_statistics(&ChainData::single(y.clone()).unwrap());
        let two = chain_statistics(&ChainData::new(vec![y.clone(), y]).unwrap());
        assert_abs_diff_eq!(two.c_yz, 2.0 * one.c_yz, epsilon = 1e-14);
        assert_abs_diff_eq!(two.c_zz, 2.0 * one.c_zz, epsilon = 1e-14);
        assert_abs_diff_eq!(two.c_yy, 2.0 * one.c_yy, epsilon = 1e-14);
        assert_abs_diff_eq!(two.c_yy_dot_z, 2.0 * one.c_yy_dot_z, epsilon = 1e-14);
    }

    #[test]
    fn closed_form_of_the_worked_example() {
        let fit = hyvarinen_closed_form(&example()).unwrap();
        assert_abs_diff_eq!(fit.lambda_hat.unwrap(), -6.0 / 11.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fit.alpha_hat, 1.1, epsilon = 1e-14);
        assert_abs_diff_eq!(fit.beta_hat, 0.6, epsilon = 1e-14);
        assert!(!fit.in_omega);

        let refit = refit_in_omega(&example(), fit, 1e-6);
        assert!(refit.in_omega && refit.projected);
        assert_abs_diff_eq!(refit.alpha_hat - 2.0 * refit.beta_hat.abs(), 2e-6, epsilon = 1e-12);
        // no point of the boundary ray does better
        let s = chain_statistics(&example());
        let at = objective_from_stats(&s, refit.alpha_hat, refit.beta_hat);
        for a in [0.5, 0.9, 1.0, 1.1, 1.5, 3.0] {
            for sign in [1.0, -1.0] {
                assert!(at <= objective_from_stats(&s, a, sign * (0.5 * a - 1e-6)) + 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_minimises_the_objective() {
        let data = example();
        let fit = hyvarinen_closed_form(&data).unwrap();
        let min = minimize(
            |t| hyvarinen_objective(&TridiagonalModel::new(t[0], t[1], 3).unwrap(), &data),
            &[1.0, 0.0],
            1e-14,
        )
        .unwrap();
        assert_abs_diff_eq!(min.argmin[0], fit.alpha_hat, epsilon = 1e-6);
        assert_abs_diff_eq!(min.argmin[1], fit.beta_hat, epsilon = 1e-6);
    }

    #[test]
    fn degenerate_fits() {
        assert!(matches!(
            hyvarinen_closed_form(&ChainData::single(vec![0.0; 3]).unwrap()),
            Err(GmrfError::Degenerate(_))
        ));
        // N = 1: z ≡ 0, so only α is identified
        let fit = hyvarinen_closed_form(&ChainData::single(vec![2.0]).unwrap()).unwrap();
        assert_eq!(fit.lambda_hat, None);
        assert_eq!(fit.beta_hat, 0.0);
        assert_abs_diff_eq!(fit.alpha_hat, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn objective_and_likelihood_examples() {
        let one = ChainData::single(vec![1.0]).unwrap();
        let m = TridiagonalModel::new(2.0, 0.0, 1).unwrap();
        assert_abs_diff_eq!(hyvarinen_objective(&m, &one), 0.0, epsilon = 1e-15);
        let zero_model = TridiagonalModel::new(0.0, 0.0, 3).unwrap();
        assert_eq!(hyvarinen_objective(&zero_model, &example()), 0.0);

        let origin = ChainData::single(vec![0.0]).unwrap();
        let unit = TridiagonalModel::new(1.0, 0.0, 1).unwrap();
        assert_eq!(pseudo_loglik(&unit, &origin).unwrap(), 0.0);
        assert_eq!(exact_neg_loglik(&unit, &origin).unwrap(), 0.0);
        assert!(matches!(
            pseudo_loglik(&zero_model, &example()),
            Err(GmrfError::NonPositiveAlpha(_))
        ));
        assert!(exact_neg_loglik(&TridiagonalModel::new(1.0, 1.0, 3).unwrap(), &example()).is_err());
    }

    #[test]
    fn pseudo_likelihood_agrees_with_hyvarinen() {
        let data = ChainData::new(vec![vec![0.4, -0.3, 1.1, 0.2, -0.8], vec![1.0, 0.5, 0.0, -0.6, 0.3]]).unwrap();
        let fit = hyvarinen_closed_form(&data).unwrap();
        // maximise over (α, λ)
        let min = minimize(
            |t| {
                let m = TridiagonalModel::new(t[0], -t[0] * t[1], 5).unwrap();
                pseudo_loglik(&m, &data).map(|v| -v).unwrap_or(f64::INFINITY)
            },
            &[1.0, 0.0],
            1e-14,
        )
        .unwrap();
        assert_abs_diff_eq!(min.argmin[0], fit.alpha_hat, epsilon = 1e-6);
        assert_abs_diff_eq!(min.argmin[1], fit.lambda_hat.unwrap(), epsilon = 1e-6);
    }

    #[test]
    fn simulation_is_seeded() {
        let m = TridiagonalModel::new(3.0, 1.0, 6).unwrap();
        let a = simulate_chain(&m, 5, SeedSpec::new(9, 2)).unwrap();
        let b = simulate_chain(&m, 5, SeedSpec::new(9, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, simulate_chain(&m, 5, SeedSpec::new(9, 3)).unwrap());
        assert!(simulate_chain(&TridiagonalModel::new(1.0, 1.0, 3).unwrap(), 1, SeedSpec::new(0, 0)).is_err());
    }
}
