use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::estimation::{Member, ParametricFamily};
use crate::numerics::{Grid1D, Matrix};
use crate::scores::RuleSpec;

use super::{ModelSelError, Result};

type LogKernel = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Prior `π(θ) = e^{log_scale} h(θ)`. Posterior computations only read the
/// kernel `ln h`, so shifting the log-prior by a constant (which only moves
/// `log_scale`) leaves them bit-for-bit unchanged.
#[derive(Clone)]
pub enum Prior {
    Density {
        log_kernel: LogKernel,
        log_scale: f64,
        proper: bool,
        label: String,
    },
    PointMass { theta: Vec<f64>, log_scale: f64 },
}

impl fmt::Debug for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prior::Density {
                log_scale,
                proper,
                label,
                ..
            } => f
                .debug_struct("Density")
                .field("label", label)
                .field("log_scale", log_scale)
                .field("proper", proper)
                .finish(),
            Prior::PointMass { theta, log_scale } => f
                .debug_struct("PointMass")
                .field("theta", theta)
                .field("log_scale", log_scale)
                .finish(),
        }
    }
}

impl Prior {
    /// Improper flat prior, `h ≡ 1`.
    pub fn flat() -> Self {
        Prior::Density {
            log_kernel: Arc::new(|_| 0.0),
            log_scale: 0.0,
            proper: false,
            label: "flat".into(),
        }
    }

    /// Independent normal components with the given means and variances.
    pub fn normal(mean: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        if mean.len() != variance.len() || variance.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(ModelSelError::Specification(format!(
                "normal prior needs matching means and positive variances, got {mean:?} and {variance:?}"
            )));
        }
        let log_scale = -0.5 * variance.iter().map(|v| (2.0 * PI * v).ln()).sum::<f64>();
        let label = format!("normal({mean:?}, {variance:?})");
        Ok(Prior::Density {
            log_kernel: Arc::new(move |t| {
                -0.5 * t
                    .iter()
                    .zip(mean.iter().zip(&variance))
                    .map(|(x, (m, v))| (x - m).powi(2) / v)
                    .sum::<f64>()
            }),
            log_scale,
            proper: true,
            label,
        })
    }

    /// A user-supplied log-kernel. `proper` asserts that `e^{ln h}` integrates
    /// to one.
    pub fn custom<F>(log_kernel: F, proper: bool, label: impl Into<String>) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Prior::Density {
            log_kernel: Arc::new(log_kernel),
            log_scale: 0.0,
            proper,
            label: label.into(),
        }
    }

    pub fn point(theta: Vec<f64>) -> Self {
        Prior::PointMass {
            theta,
            log_scale: 0.0,
        }
    }

    /// The prior multiplied by `e^c`. A nonzero shift makes a proper prior
    /// unnormalized.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Prior::Density {
                log_scale, proper, ..
            } => {
                *log_scale += c;
                *proper &= c == 0.0;
            }
            Prior::PointMass { log_scale, .. } => *log_scale += c,
        }
        out
    }

    /// Total mass one.
    pub fn is_proper(&self) -> bool {
        match self {
            Prior::Density { proper, .. } => *proper,
            Prior::PointMass { log_scale, .. } => *log_scale == 0.0,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Prior::Density { label, .. } => label.clone(),
            Prior::PointMass { theta, .. } => format!("point({theta:?})"),
        }
    }
}

/// A Bayesian model `M`: a likelihood family, a prior on `θ`, and the box
/// over which posterior integrals are taken (at most two dimensions).
#[derive(Clone)]
pub struct BayesModelSpec {
    label: String,
    family: Arc<dyn ParametricFamily>,
    prior: Prior,
    domain: Vec<(f64, f64)>,
    points: usize,
}

impl fmt::Debug for BayesModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BayesModelSpec")
            .field("label", &self.label)
            .field("family", &self.family.name())
            .field("prior", &self.prior)
            .field("domain", &self.domain)
            .field("points", &self.points)
            .finish()
    }
}

const DEFAULT_POINTS: usize = 201;
const MAX_DOUBLINGS: usize = 3;
/// Tolerance on the change of the log normalizer when the domain doubles.
const STABLE_LOG: f64 = 1e-6;

impl BayesModelSpec {
    pub fn new<F>(label: impl Into<String>, family: F, prior: Prior, domain: Vec<(f64, f64)>) -> Result<Self>
    where
        F: ParametricFamily + 'static,
    {
        Self::from_arc(label, Arc::new(family), prior, domain)
    }

    pub fn from_arc(
        label: impl Into<String>,
        family: Arc<dyn ParametricFamily>,
        prior: Prior,
        domain: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let label = label.into();
        if let Prior::PointMass { theta, .. } = &prior {
            if theta.len() != family.dimension() {
                return Err(ModelSelError::DimensionMismatch(format!(
                    "point prior has {} coordinates, family `{}` has {}",
                    theta.len(),
                    family.name(),
                    family.dimension()
                )));
            }
        } else {
            if domain.len() != family.dimension() {
                return Err(ModelSelError::DimensionMismatch(format!(
                    "quadrature box has {} axes, family `{}` has {} parameters",
                    domain.len(),
                    family.name(),
                    family.dimension()
                )));
            }
            if domain.len() > 2 {
                return Err(ModelSelError::Quadrature(format!(
                    "posterior quadrature supports at most 2 parameters, model `{label}` has {}",
                    domain.len()
                )));
            }
            if let Some((lo, hi)) = domain.iter().find(|(lo, hi)| !(lo < hi && lo.is_finite() && hi.is_finite())) {
                return Err(ModelSelError::Quadrature(format!("invalid axis [{lo}, {hi}]")));
            }
        }
        Ok(Self {
            label,
            family,
            prior,
            domain,
            points: DEFAULT_POINTS,
        })
    }

    /// Simpson nodes per axis (default 201).
    pub fn with_points(mut self, points: usize) -> Self {
        self.points = points.max(3);
        self
    }

    /// The same model with the log-prior shifted by `c`.
    pub fn with_prior_shift(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.prior = self.prior.shifted(c);
        out
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn family(&self) -> &dyn ParametricFamily {
        self.family.as_ref()
    }
}

/// `ln Π_i p(x_i | θ)`, or `−∞` outside the parameter domain.
fn log_likelihood(family: &dyn ParametricFamily, theta: &[f64], data: &[Vec<f64>]) -> Result<f64> {
    if !family.theta_domain().contains(theta) {
        return Ok(f64::NEG_INFINITY);
    }
    match family.member(theta)? {
        Member::Density(q) => {
            if !q.is_normalized() {
                return Err(ModelSelError::Specification(format!(
                    "likelihood of `{}` at θ = {theta:?} is not normalized",
                    family.name()
                )));
            }
            let mut total = 0.0;
            for x in data {
                if x.len() != q.dimension() {
                    return Err(ModelSelError::DimensionMismatch(format!(
                        "observation has {} coordinates, density has {}",
                        x.len(),
                        q.dimension()
                    )));
                }
                total += q.log_density(x);
            }
            Ok(total)
        }
        Member::Discrete(d) => {
            let mut total = 0.0;
            for x in data {
                let index = match x.as_slice() {
                    [v] if *v >= 0.0 && v.fract() == 0.0 && (*v as usize) < d.len() => *v as usize,
                    _ => {
                        return Err(ModelSelError::Specification(format!(
                            "{x:?} is not an outcome index below {}",
                            d.len()
                        )))
                    }
                };
                total += d.probs()[index].ln();
            }
            Ok(total)
        }
    }
}

/// Quadrature nodes with `ln(weight) + ln p(x|θ) + ln h(θ)`.
struct PosteriorGrid {
    nodes: Vec<(Vec<f64>, f64)>,
    log_total: f64,
}

impl PosteriorGrid {
    fn max_log(&self) -> f64 {
        self.nodes.iter().map(|n| n.1).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Normalized posterior weights.
    fn weights(&self) -> Vec<f64> {
        let m = self.max_log();
        let raw: Vec<f64> = self.nodes.iter().map(|n| (n.1 - m).exp()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }
}

fn build_grid(
    model: &BayesModelSpec,
    log_kernel: &LogKernel,
    domain: &[(f64, f64)],
    points: usize,
    data: &[Vec<f64>],
) -> Result<PosteriorGrid> {
    let axes = domain
        .iter()
        .map(|&(lo, hi)| {
            let g = Grid1D::new(lo, hi, points)?;
            Ok((g.nodes().collect::<Vec<_>>(), g.weights()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut nodes = Vec::new();
    let mut push = |theta: Vec<f64>, w: f64| -> Result<()> {
        let ll = log_likelihood(model.family(), &theta, data)?;
        let lp = log_kernel(&theta);
        let v = w.ln() + ll + lp;
        if v.is_nan() {
            return Err(ModelSelError::Specification(format!(
                "posterior integrand is NaN at θ = {theta:?}"
            )));
        }
        nodes.push((theta, v));
        Ok(())
    };
    match axes.as_slice() {
        [(n0, w0)] => {
            for (t, w) in n0.iter().zip(w0) {
                push(vec![*t], *w)?;
            }
        }
        [(n0, w0), (n1, w1)] => {
            for (a, wa) in n0.iter().zip(w0) {
                for (b, wb) in n1.iter().zip(w1) {
                    push(vec![*a, *b], wa * wb)?;
                }
            }
        }
        _ => unreachable!("dimension checked at construction"),
    }
    let m = nodes.iter().map(|n| n.1).fold(f64::NEG_INFINITY, f64::max);
    let log_total = if m == f64::NEG_INFINITY {
        m
    } else {
        m + nodes.iter().map(|n| (n.1 - m).exp()).sum::<f64>().ln()
    };
    Ok(PosteriorGrid { nodes, log_total })
}

/// Posterior grid on the configured box, widened by doubling until the
/// normalizer stops changing. An integral that keeps growing means the
/// posterior is improper.
fn posterior_grid(model: &BayesModelSpec, data: &[Vec<f64>]) -> Result<PosteriorGrid> {
    let Prior::Density { log_kernel, .. } = &model.prior else {
        unreachable!("point-mass priors are handled directly")
    };
    if data.is_empty() {
        return Err(ModelSelError::Specification("no observations".into()));
    }
    let mut domain = model.domain.clone();
    let mut points = model.points;
    let mut current = build_grid(model, log_kernel, &domain, points, data)?;
    if !current.log_total.is_finite() {
        return Err(ModelSelError::ImproperPosterior {
            model: model.label.clone(),
            detail: format!("posterior normalizer is {} on the quadrature box", current.log_total.exp()),
        });
    }
    for _ in 0..MAX_DOUBLINGS {
        let wider: Vec<(f64, f64)> = domain
            .iter()
            .map(|&(lo, hi)| {
                let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                (c - 2.0 * h, c + 2.0 * h)
            })
            .collect();
        // keep the node spacing so the wider grid contains the old one
        let wider_points = 2 * (points - 1) + 1;
        let next = build_grid(model, log_kernel, &wider, wider_points, data)?;
        if (next.log_total - current.log_total).abs() <= STABLE_LOG {
            return Ok(current);
        }
        domain = wider;
        points = wider_points;
        current = next;
    }
    Err(ModelSelError::ImproperPosterior {
        model: model.label.clone(),
        detail: format!(
            "posterior normalizer keeps growing when the quadrature box is doubled {MAX_DOUBLINGS} times"
        ),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginalDensity {
    pub value: f64,
    pub log_value: f64,
    /// Set under an improper prior: the value is known only up to `c_M`.
    pub scale_arbitrary: bool,
}

/// `p_M(x₀) = ∫ p(x₀|θ) π(θ) dθ` for the observations `x₀` (independent
/// given `θ`).
pub fn marginal_density(model: &BayesModelSpec, data: &[Vec<f64>]) -> Result<MarginalDensity> {
    let log_value = match &model.prior {
        Prior::PointMass { theta, log_scale } => log_likelihood(model.family(), theta, data)? + log_scale,
        Prior::Density { log_scale, .. } => posterior_grid(model, data)?.log_total + log_scale,
    };
    Ok(MarginalDensity {
        value: log_value.exp(),
        log_value,
        scale_arbitrary: !model.prior.is_proper(),
    })
}

/// `ln p_A(x₀) − ln p_B(x₀)`; refused unless both priors are proper.
pub fn log_bayes_factor(a: &BayesModelSpec, b: &BayesModelSpec, data: &[Vec<f64>]) -> Result<f64> {
    for m in [a, b] {
        if !m.prior.is_proper() {
            return Err(ModelSelError::ImproperPrior {
                model: m.label.clone(),
                operation: "a Bayes factor",
            });
        }
    }
    Ok(marginal_density(a, data)?.log_value - marginal_density(b, data)?.log_value)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorMoments {
    pub mean: Vec<f64>,
    pub covariance: Matrix,
}

/// Posterior mean and covariance of `θ` by quadrature.
pub fn posterior_moments(model: &BayesModelSpec, data: &[Vec<f64>]) -> Result<PosteriorMoments> {
    if let Prior::PointMass { theta, .. } = &model.prior {
        return Ok(PosteriorMoments {
            mean: theta.clone(),
            covariance: Matrix::zeros(theta.len(), theta.len()),
        });
    }
    let grid = posterior_grid(model, data)?;
    let w = grid.weights();
    let p = model.domain.len();
    let mut mean = vec![0.0; p];
    for ((t, _), wk) in grid.nodes.iter().zip(&w) {
        for i in 0..p {
            mean[i] += wk * t[i];
        }
    }
    let mut cov = Matrix::zeros(p, p);
    for ((t, _), wk) in grid.nodes.iter().zip(&w) {
        for i in 0..p {
            for j in 0..p {
                cov[(i, j)] += wk * (t[i] - mean[i]) * (t[j] - mean[j]);
            }
        }
    }
    Ok(PosteriorMoments {
        mean,
        covariance: cov,
    })
}

/// Hyvärinen score of the marginal density at `x₀`, computed as
/// `E{S_H(x₀, P_θ) | x₀} + ½ Σ_i var{∂ ln p(x₀|θ)/∂x_i | x₀}`.
///
/// Only posterior weights enter, so the constant of an improper prior
/// cancels; the posterior itself must be proper.
pub fn hyvarinen_predictive_score(model: &BayesModelSpec, data: &[Vec<f64>]) -> Result<f64> {
    if let Prior::PointMass { theta, .. } = &model.prior {
        let Member::Density(q) = model.family().member(theta)? else {
            return Err(needs_density(model));
        };
        let mut total = 0.0;
        for x in data {
            total += RuleSpec::Hyvarinen.score_density(x, &q)?;
        }
        return Ok(total);
    }
    let grid = posterior_grid(model, data)?;
    let weights = grid.weights();
    let mut mean_sh = 0.0;
    let mut seen = 0.0;
    // weighted running mean and sum of squared deviations per gradient entry
    let mut g_mean: Vec<f64> = Vec::new();
    let mut g_ss: Vec<f64> = Vec::new();
    for ((theta, _), &w) in grid.nodes.iter().zip(&weights) {
        if w == 0.0 {
            continue;
        }
        let Member::Density(q) = model.family().member(theta)? else {
            return Err(needs_density(model));
        };
        let mut sh = 0.0;
        let mut grads = Vec::with_capacity(data.len() * q.dimension());
        for x in data {
            let g = q.gradient_log_density(x)?;
            let lap = q.laplacian_log_density(x)?;
            sh += lap + 0.5 * g.iter().map(|v| v * v).sum::<f64>();
            grads.extend(g);
        }
        if g_mean.is_empty() {
            g_mean = vec![0.0; grads.len()];
            g_ss = vec![0.0; grads.len()];
        }
        seen += w;
        let f = w / seen;
        mean_sh += f * (sh - mean_sh);
        for ((m, ss), g) in g_mean.iter_mut().zip(g_ss.iter_mut()).zip(&grads) {
            let delta = g - *m;
            *m += f * delta;
            *ss += w * delta * (g - *m);
        }
    }
    let variance: f64 = g_ss.iter().sum::<f64>() / seen;
    Ok(mean_sh + 0.5 * variance)
}

fn needs_density(model: &BayesModelSpec) -> ModelSelError {
    ModelSelError::UnsupportedRule {
        rule: format!("hyvarinen on the discrete family `{}`", model.family().name()),
    }
}
