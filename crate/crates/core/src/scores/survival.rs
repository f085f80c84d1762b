use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::numerics::{integrate, Grid1D};

use super::{ConvexFn, Result, ScoreError};

/// A possibly censored survival time: `m = min(X, C)` and `delta = 1` when
/// the event was observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalObservation {
    m: f64,
    delta: bool,
}

impl SurvivalObservation {
    pub fn new(m: f64, delta: bool) -> Result<Self> {
        if !(m >= 0.0) || !m.is_finite() {
            return Err(ScoreError::InvalidDistribution(format!(
                "survival time must be finite and nonnegative, got {m}"
            )));
        }
        Ok(Self { m, delta })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn delta(&self) -> bool {
        self.delta
    }
}

/// Hazard function `u ↦ λ_Q(u)` of a quoted survival distribution.
#[derive(Clone)]
pub struct HazardModel {
    hazard: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for HazardModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("HazardModel")
    }
}

impl HazardModel {
    pub fn new<F>(hazard: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            hazard: Arc::new(hazard),
        }
    }

    /// Exponential distribution with the given rate.
    pub fn constant(rate: f64) -> Self {
        Self::new(move |_| rate)
    }

    /// Weibull hazard `(k/s)(u/s)^{k−1}`.
    pub fn weibull(shape: f64, scale: f64) -> Self {
        Self::new(move |u| shape / scale * (u / scale).powf(shape - 1.0))
    }

    pub fn at(&self, u: f64) -> f64 {
        (self.hazard)(u)
    }

    fn checked(&self, u: f64) -> Result<f64> {
        let v = self.at(u);
        if v.is_nan() || v < 0.0 {
            Err(ScoreError::NegativeHazard { at: u, value: v })
        } else {
            Ok(v)
        }
    }
}

/// `∫₀^m γ(λ(u)) du − δ ψ′(λ(m))` with `γ(λ) = λψ′(λ) − ψ(λ)`, the integral
/// taken by composite Simpson quadrature with `points` nodes on `[0, m]`.
pub fn survival_score(
    obs: &SurvivalObservation,
    hazard: &HazardModel,
    psi: &ConvexFn,
    points: usize,
) -> Result<f64> {
    let m = obs.m();
    let integral = if m == 0.0 {
        hazard.checked(0.0)?;
        0.0
    } else {
        let grid = Grid1D::new(0.0, m, points)?;
        for u in grid.nodes() {
            hazard.checked(u)?;
        }
        integrate(|u| psi.conjugate_gap(hazard.at(u)), &grid)?
    };
    let event = if obs.delta() {
        psi.derivative(hazard.checked(m)?)
    } else {
        0.0
    };
    Ok(integral - event)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, Exp};

    fn square() -> ConvexFn {
        ConvexFn::power(2.0).unwrap()
    }

    #[test]
    fn documented_examples() {
        let h = HazardModel::constant(1.0);
        let event = SurvivalObservation::new(1.0, true).unwrap();
        let censored = SurvivalObservation::new(1.0, false).unwrap();
        let empty = SurvivalObservation::new(0.0, false).unwrap();
        assert_abs_diff_eq!(survival_score(&event, &h, &square(), 101).unwrap(), -1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(survival_score(&censored, &h, &square(), 101).unwrap(), 1.0, epsilon = 1e-13);
        assert_eq!(survival_score(&empty, &h, &square(), 101).unwrap(), 0.0);
        assert!(SurvivalObservation::new(-0.1, true).is_err());
    }

    #[test]
    fn weibull_integral_matches_closed_form() {
        // ψ = t²: γ(λ) = λ², and for shape 2 scale 1 λ(u) = 2u, so ∫₀^m 4u² = 4m³/3
        let h = HazardModel::weibull(2.0, 1.0);
        let obs = SurvivalObservation::new(1.5, true).unwrap();
        let got = survival_score(&obs, &h, &square(), 201).unwrap();
        assert_abs_diff_eq!(got, 4.0 * 1.5f64.powi(3) / 3.0 - 2.0 * 3.0, epsilon = 1e-10);
    }

    #[test]
    fn negative_hazard_is_rejected() {
        let h = HazardModel::new(|u| 1.0 - u);
        let obs = SurvivalObservation::new(2.0, false).unwrap();
        assert!(matches!(
            survival_score(&obs, &h, &square(), 11),
            Err(ScoreError::NegativeHazard { .. })
        ));
    }

    #[test]
    fn censored_exponential_score_is_minimised_at_true_rate() {
        // X ~ Exp(p), C ~ Exp(c); the expected score of a quoted rate q is
        // (γ(q) − pψ′(q)) / (p + c)
        let p = 1.3;
        let c = 0.7;
        let psi = ConvexFn::tlogt();
        let closed = |q: f64| (psi.conjugate_gap(q) - p * psi.derivative(q)) / (p + c);
        let mut rng = crate::numerics::SeedSpec::new(11, 0).rng();
        let draws: Vec<SurvivalObservation> = (0..20_000)
            .map(|_| {
                let x: f64 = Exp::new(p).unwrap().sample(&mut rng);
                let t: f64 = Exp::new(c).unwrap().sample(&mut rng);
                SurvivalObservation::new(x.min(t), x <= t).unwrap()
            })
            .collect();
        let mc = |q: f64| {
            let h = HazardModel::constant(q);
            draws
                .iter()
                .map(|o| survival_score(o, &h, &psi, 3).unwrap())
                .sum::<f64>()
                / draws.len() as f64
        };
        let grid: Vec<f64> = (1..=30).map(|i| 0.1 * i as f64).collect();
        let best = grid
            .iter()
            .copied()
            .min_by(|a, b| closed(*a).total_cmp(&closed(*b)))
            .unwrap();
        assert_abs_diff_eq!(best, p, epsilon = 1e-12);
        assert_abs_diff_eq!(mc(p), closed(p), epsilon = 0.03);
        for q in [0.5, 1.0, 2.0, 2.5] {
            assert!(mc(q) > mc(p));
        }
    }
}
