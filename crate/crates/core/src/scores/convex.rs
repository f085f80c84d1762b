use std::fmt;
use std::sync::Arc;

use super::{Result, ScoreError};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A convex function `ψ` on `[0, ∞)` with its first two derivatives,
/// the ingredient of Bregman and survival scores.
#[derive(Clone)]
pub struct ConvexFn {
    name: String,
    psi: ScalarFn,
    d1: ScalarFn,
    d2: ScalarFn,
    curvature_bounded_near_zero: Option<bool>,
}

impl fmt::Debug for ConvexFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ConvexFn({})", self.name)
    }
}

impl ConvexFn {
    pub const REGISTRY: &'static [&'static str] = &["tlogt", "power:<gamma>", "brier"];

    pub fn new<P, D1, D2>(name: impl Into<String>, psi: P, d1: D1, d2: D2) -> Self
    where
        P: Fn(f64) -> f64 + Send + Sync + 'static,
        D1: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            psi: Arc::new(psi),
            d1: Arc::new(d1),
            d2: Arc::new(d2),
            curvature_bounded_near_zero: None,
        }
    }

    /// `ψ(t) = t ln t`, generating the log score.
    pub fn tlogt() -> Self {
        let mut f = Self::new(
            "tlogt",
            |t| if t == 0.0 { 0.0 } else { t * t.ln() },
            |t| t.ln() + 1.0,
            |t| 1.0 / t,
        );
        f.curvature_bounded_near_zero = Some(false);
        f
    }

    /// `ψ(t) = t^γ`, generating the Tsallis score.
    pub fn power(gamma: f64) -> Result<Self> {
        if !(gamma > 1.0) {
            return Err(ScoreError::Specification(format!(
                "power ψ needs γ > 1, got {gamma}"
            )));
        }
        let mut f = Self::new(
            format!("power:{gamma}"),
            move |t: f64| t.powf(gamma),
            move |t: f64| gamma * t.powf(gamma - 1.0),
            move |t: f64| gamma * (gamma - 1.0) * t.powf(gamma - 2.0),
        );
        f.curvature_bounded_near_zero = Some(gamma >= 2.0);
        Ok(f)
    }

    /// `ψ(t) = (2t² − 1)/4`, generating the Brier score on a binary space.
    pub fn brier() -> Self {
        let mut f = Self::new("brier", |t| (2.0 * t * t - 1.0) / 4.0, |t| t, |_| 1.0);
        f.curvature_bounded_near_zero = Some(true);
        f
    }

    /// Look up `tlogt`, `brier` or `power:<γ>`.
    pub fn from_name(name: &str) -> Result<Self> {
        match name.trim() {
            "tlogt" => Ok(Self::tlogt()),
            "brier" => Ok(Self::brier()),
            other => {
                if let Some(g) = other.strip_prefix("power:") {
                    let gamma: f64 = g.parse().map_err(|_| {
                        ScoreError::Specification(format!("cannot parse γ in {other:?}"))
                    })?;
                    Self::power(gamma)
                } else {
                    Err(ScoreError::Specification(format!(
                        "unknown convex function {other:?}; known: {}",
                        Self::REGISTRY.join(", ")
                    )))
                }
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.psi)(t)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        (self.d1)(t)
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        (self.d2)(t)
    }

    /// `ψ(t) − t ψ′(t)`, taking the limit `ψ(0)` at `t = 0`.
    pub fn tangent_intercept(&self, t: f64) -> f64 {
        if t == 0.0 {
            self.value(0.0)
        } else {
            self.value(t) - t * self.derivative(t)
        }
    }

    /// `γ(λ) = λψ′(λ) − ψ(λ)`, the survival-score integrand.
    pub fn conjugate_gap(&self, lambda: f64) -> f64 {
        -self.tangent_intercept(lambda)
    }

    /// Sampled convexity check: `ψ″ ≥ 0` on a grid over `(0, 100]`.
    pub fn check_convex(&self) -> Result<()> {
        for t in probe_points() {
            let d2 = self.second_derivative(t);
            if d2.is_nan() || d2 < -1e-12 {
                return Err(ScoreError::Specification(format!(
                    "ψ = {} is not convex: ψ''({t}) = {d2}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Whether `ψ″` stays bounded as `t → 0⁺`; declared for registry
    /// functions, probed numerically otherwise.
    pub fn curvature_bounded_near_zero(&self) -> bool {
        if let Some(known) = self.curvature_bounded_near_zero {
            return known;
        }
        let values: Vec<f64> = (1..=12)
            .map(|k| self.second_derivative(10f64.powi(-k)).abs())
            .collect();
        let last = *values.last().expect("nonempty");
        last.is_finite() && last <= 10.0 * values[5].max(1.0)
    }
}

fn probe_points() -> impl Iterator<Item = f64> {
    (-60..=20).map(|k| 10f64.powf(k as f64 / 10.0))
}
