use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::numerics::{integrate, Matrix};

use super::{ConvexFn, DensityModel, DiscreteDistribution, JointDiscrete, Result, ScoreError};

/// Loss `L(x, a)` of action `a` when the state turns out to be `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTable {
    states: Vec<String>,
    actions: Vec<String>,
    loss: Matrix,
}

impl LossTable {
    pub fn new(states: Vec<String>, actions: Vec<String>, loss: Matrix) -> Result<Self> {
        if actions.is_empty() {
            return Err(ScoreError::Specification("loss table has no actions".into()));
        }
        if states.is_empty() {
            return Err(ScoreError::Specification("loss table has no states".into()));
        }
        if loss.rows() != states.len() || loss.cols() != actions.len() {
            return Err(ScoreError::Specification(format!(
                "loss matrix is {}x{}, expected {}x{}",
                loss.rows(),
                loss.cols(),
                states.len(),
                actions.len()
            )));
        }
        if let Some(v) = loss.as_slice().iter().find(|v| !v.is_finite()) {
            return Err(ScoreError::Specification(format!("non-finite loss {v}")));
        }
        Ok(Self {
            states,
            actions,
            loss,
        })
    }

    /// 0–1 loss with one action per state.
    pub fn zero_one(size: usize) -> Self {
        let labels: Vec<String> = (0..size).map(|i| i.to_string()).collect();
        let mut m = Matrix::zeros(size, size);
        for i in 0..size {
            for j in 0..size {
                if i != j {
                    m[(i, j)] = 1.0;
                }
            }
        }
        Self::new(labels.clone(), labels, m).expect("well-formed 0-1 loss")
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn loss(&self, state: usize, action: usize) -> f64 {
        self.loss[(state, action)]
    }

    /// Bayes act under `q`: the action of least expected loss, ties going to
    /// the lowest action index.
    pub fn bayes_act(&self, q: &DiscreteDistribution) -> Result<usize> {
        if q.len() != self.states.len() {
            return Err(ScoreError::Specification(format!(
                "loss table has {} states, distribution has {}",
                self.states.len(),
                q.len()
            )));
        }
        let mut best = 0;
        let mut best_loss = f64::INFINITY;
        for a in 0..self.actions.len() {
            let expected: f64 = q
                .probs()
                .iter()
                .enumerate()
                .map(|(x, p)| p * self.loss(x, a))
                .sum();
            if expected < best_loss {
                best = a;
                best_loss = expected;
            }
        }
        Ok(best)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleFamily {
    Log,
    Brier,
    Tsallis,
    Bregman,
    Hyvarinen,
    Survival,
    Composite,
    Pseudo,
    FromLoss,
}

impl RuleFamily {
    pub const ALL: [RuleFamily; 9] = [
        RuleFamily::Log,
        RuleFamily::Brier,
        RuleFamily::Tsallis,
        RuleFamily::Bregman,
        RuleFamily::Hyvarinen,
        RuleFamily::Survival,
        RuleFamily::Composite,
        RuleFamily::Pseudo,
        RuleFamily::FromLoss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleFamily::Log => "log",
            RuleFamily::Brier => "brier",
            RuleFamily::Tsallis => "tsallis",
            RuleFamily::Bregman => "bregman",
            RuleFamily::Hyvarinen => "hyvarinen",
            RuleFamily::Survival => "survival",
            RuleFamily::Composite => "composite",
            RuleFamily::Pseudo => "pseudo",
            RuleFamily::FromLoss => "from-loss",
        }
    }
}

impl fmt::Display for RuleFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleFamily {
    type Err = ScoreError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        RuleFamily::ALL
            .iter()
            .copied()
            .find(|f| f.name() == key || (key == "fromloss" && *f == RuleFamily::FromLoss))
            .ok_or_else(|| {
                let names: Vec<&str> = RuleFamily::ALL.iter().map(|f| f.name()).collect();
                ScoreError::Specification(format!(
                    "unknown rule {s:?}; known rules: {}",
                    names.join(", ")
                ))
            })
    }
}

/// Optional parameters consumed by [`RuleSpec::build`].
#[derive(Debug, Clone, Default)]
pub struct RuleParams {
    pub gamma: Option<f64>,
    pub psi: Option<ConvexFn>,
    pub components: Option<Vec<(RuleSpec, Vec<usize>)>>,
    pub base: Option<RuleSpec>,
    pub loss: Option<LossTable>,
}

/// A scoring rule `S(x, Q)`.
#[derive(Debug, Clone)]
pub enum RuleSpec {
    /// `−ln q(x)`.
    Log,
    /// Quadratic score scaled so that on a binary space `S(1, Q) = (1 − q)²`.
    Brier,
    /// `(γ − 1)∫q^γ − γ q(x)^{γ−1}`, `γ > 1`.
    Tsallis { gamma: f64 },
    /// `−ψ′(q(x)) − ∫[ψ(q) − qψ′(q)]`.
    Bregman { psi: ConvexFn },
    /// `Δ ln q(x) + ½|∇ ln q(x)|²`.
    Hyvarinen,
    /// Hazard-based score for censored survival times.
    Survival { psi: ConvexFn },
    /// Sum of rules applied to marginals over variable subsets.
    Composite { components: Vec<(RuleSpec, Vec<usize>)> },
    /// Sum of a base rule applied to each site's full conditional.
    Pseudo { base: Box<RuleSpec> },
    /// `L(x, a_Q)` for the Bayes act `a_Q` of a decision problem.
    FromLoss { loss: LossTable },
}

/// Scoring rule induced by a decision problem.
pub fn rule_from_loss(loss: LossTable) -> RuleSpec {
    RuleSpec::FromLoss { loss }
}

impl RuleSpec {
    pub fn tsallis(gamma: f64) -> Result<Self> {
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(ScoreError::Specification(format!(
                "Tsallis score needs γ > 1, got {gamma}"
            )));
        }
        Ok(RuleSpec::Tsallis { gamma })
    }

    pub fn bregman(psi: ConvexFn) -> Result<Self> {
        psi.check_convex()?;
        Ok(RuleSpec::Bregman { psi })
    }

    pub fn survival(psi: ConvexFn) -> Result<Self> {
        psi.check_convex()?;
        Ok(RuleSpec::Survival { psi })
    }

    pub fn composite(components: Vec<(RuleSpec, Vec<usize>)>) -> Result<Self> {
        if components.is_empty() {
            return Err(ScoreError::Specification(
                "composite score needs at least one component".into(),
            ));
        }
        Ok(RuleSpec::Composite { components })
    }

    pub fn pseudo(base: RuleSpec) -> Self {
        RuleSpec::Pseudo {
            base: Box::new(base),
        }
    }

    /// Assemble a rule from a family name and parameters, failing when a
    /// parameter the family needs is missing.
    pub fn build(family: RuleFamily, params: RuleParams) -> Result<Self> {
        let missing = |what: &str| {
            ScoreError::Specification(format!("the {family} rule needs {what}"))
        };
        match family {
            RuleFamily::Log => Ok(RuleSpec::Log),
            RuleFamily::Brier => Ok(RuleSpec::Brier),
            RuleFamily::Hyvarinen => Ok(RuleSpec::Hyvarinen),
            RuleFamily::Tsallis => Self::tsallis(params.gamma.ok_or_else(|| missing("gamma"))?),
            RuleFamily::Bregman => Self::bregman(params.psi.ok_or_else(|| missing("psi"))?),
            RuleFamily::Survival => Self::survival(params.psi.ok_or_else(|| missing("psi"))?),
            RuleFamily::Composite => {
                Self::composite(params.components.ok_or_else(|| missing("components"))?)
            }
            RuleFamily::Pseudo => Ok(Self::pseudo(
                params.base.ok_or_else(|| missing("a base rule"))?,
            )),
            RuleFamily::FromLoss => Ok(rule_from_loss(
                params.loss.ok_or_else(|| missing("a loss table"))?,
            )),
        }
    }

    pub fn family(&self) -> RuleFamily {
        match self {
            RuleSpec::Log => RuleFamily::Log,
            RuleSpec::Brier => RuleFamily::Brier,
            RuleSpec::Tsallis { .. } => RuleFamily::Tsallis,
            RuleSpec::Bregman { .. } => RuleFamily::Bregman,
            RuleSpec::Hyvarinen => RuleFamily::Hyvarinen,
            RuleSpec::Survival { .. } => RuleFamily::Survival,
            RuleSpec::Composite { .. } => RuleFamily::Composite,
            RuleSpec::Pseudo { .. } => RuleFamily::Pseudo,
            RuleSpec::FromLoss { .. } => RuleFamily::FromLoss,
        }
    }

    /// Short description including parameters, e.g. `tsallis(gamma=2)`.
    pub fn label(&self) -> String {
        match self {
            RuleSpec::Tsallis { gamma } => format!("tsallis(gamma={gamma})"),
            RuleSpec::Bregman { psi } => format!("bregman(psi={})", psi.name()),
            RuleSpec::Survival { psi } => format!("survival(psi={})", psi.name()),
            RuleSpec::Pseudo { base } => format!("pseudo({})", base.label()),
            RuleSpec::Composite { components } => format!(
                "composite({})",
                components
                    .iter()
                    .map(|(r, s)| format!("{}@{s:?}", r.label()))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            other => other.family().name().to_string(),
        }
    }

    /// Homogeneous rules are unchanged when the quoted density is rescaled.
    pub fn is_homogeneous(&self) -> bool {
        matches!(self, RuleSpec::Hyvarinen)
    }

    /// Score of every outcome of `q`, i.e. the vector `x ↦ S(x, q)`.
    pub fn score_vector(&self, q: &DiscreteDistribution) -> Result<Vec<f64>> {
        let probs = q.probs();
        match self {
            RuleSpec::Log => Ok(probs
                .iter()
                .map(|&p| if p > 0.0 { -p.ln() } else { f64::INFINITY })
                .collect()),
            RuleSpec::Brier => {
                let sq: f64 = probs.iter().map(|p| p * p).sum();
                Ok(probs
                    .iter()
                    .map(|&p| {
                        // ½ Σ_y (1{y = x} − q_y)²
                        0.5 * ((1.0 - p).powi(2) + sq - p * p)
                    })
                    .collect())
            }
            RuleSpec::Tsallis { gamma } => {
                let g = *gamma;
                let s: f64 = probs.iter().map(|p| p.powf(g)).sum();
                Ok(probs
                    .iter()
                    .map(|p| (g - 1.0) * s - g * p.powf(g - 1.0))
                    .collect())
            }
            RuleSpec::Bregman { psi } => {
                let s: f64 = probs.iter().map(|&p| psi.tangent_intercept(p)).sum();
                Ok(probs
                    .iter()
                    .map(|&p| {
                        let v = -psi.derivative(p) - s;
                        if v.is_nan() {
                            f64::INFINITY
                        } else {
                            v
                        }
                    })
                    .collect())
            }
            RuleSpec::FromLoss { loss } => {
                let act = loss.bayes_act(q)?;
                Ok((0..q.len()).map(|x| loss.loss(x, act)).collect())
            }
            RuleSpec::Composite { .. } | RuleSpec::Pseudo { .. } => {
                let joint = JointDiscrete::from_distribution(q.clone());
                (0..q.len())
                    .map(|x| self.score_joint(&[x], &joint))
                    .collect()
            }
            RuleSpec::Hyvarinen | RuleSpec::Survival { .. } => Err(ScoreError::NotApplicable {
                rule: self.label(),
                target: "discrete distribution",
            }),
        }
    }

    pub fn score_discrete(&self, x: usize, q: &DiscreteDistribution) -> Result<f64> {
        q.check_index(x)?;
        match self {
            RuleSpec::Log => {
                let p = q.prob(x);
                Ok(if p > 0.0 { -p.ln() } else { f64::INFINITY })
            }
            _ => Ok(self.score_vector(q)?[x]),
        }
    }

    /// Score of a joint configuration. Composite and pseudo rules use the
    /// marginals and full conditionals of `q`; other rules score the
    /// configuration as a single outcome.
    pub fn score_joint(&self, x: &[usize], q: &JointDiscrete) -> Result<f64> {
        match self {
            RuleSpec::Composite { components } => {
                let mut total = 0.0;
                for (index, (rule, subset)) in components.iter().enumerate() {
                    let wrap = |source| ScoreError::Component {
                        index,
                        source: Box::new(source),
                    };
                    let marginal = q.marginal(subset).map_err(wrap)?;
                    let sub: Vec<usize> = subset
                        .iter()
                        .map(|&v| x.get(v).copied().ok_or(ScoreError::DimensionMismatch {
                            expected: q.variables(),
                            got: x.len(),
                        }))
                        .collect::<Result<_>>()?;
                    total += rule.score_joint(&sub, &marginal).map_err(wrap)?;
                }
                Ok(total)
            }
            RuleSpec::Pseudo { base } => {
                q.encode(x)?;
                let mut total = 0.0;
                for site in 0..q.variables() {
                    let cond = q.conditional(site, x)?;
                    total += base.score_discrete(x[site], &cond)?;
                }
                Ok(total)
            }
            _ => self.score_discrete(q.encode(x)?, q.flat()),
        }
    }

    /// Precompute the observation-independent part of the score for `q`.
    pub fn density_scorer<'a>(&'a self, q: &'a DensityModel) -> Result<DensityScorer<'a>> {
        let label = || self.label();
        let need_normalized = |rule: &RuleSpec| {
            if q.is_normalized() {
                Ok(())
            } else {
                Err(ScoreError::Unnormalized { rule: rule.label() })
            }
        };
        let kind = match self {
            RuleSpec::Log => {
                need_normalized(self)?;
                ScorerKind::Log
            }
            RuleSpec::Hyvarinen => ScorerKind::Hyvarinen,
            RuleSpec::Tsallis { gamma } => {
                need_normalized(self)?;
                let integral = q.power_integral(*gamma, &label())?;
                ScorerKind::Tsallis {
                    gamma: *gamma,
                    constant: (gamma - 1.0) * integral,
                }
            }
            RuleSpec::Brier => {
                need_normalized(self)?;
                ScorerKind::Quadratic {
                    constant: 0.5 * q.power_integral(2.0, &label())?,
                }
            }
            RuleSpec::Bregman { psi } => {
                need_normalized(self)?;
                let grid = q.integration_grid(&label())?;
                let integral = integrate(
                    |y| psi.tangent_intercept(q.density(&[y])),
                    grid,
                )?;
                ScorerKind::Bregman { psi, integral }
            }
            RuleSpec::Survival { .. } => {
                return Err(ScoreError::NotApplicable {
                    rule: label(),
                    target: "density (use survival_score with a hazard model)",
                })
            }
            RuleSpec::Composite { .. } | RuleSpec::Pseudo { .. } | RuleSpec::FromLoss { .. } => {
                return Err(ScoreError::NotApplicable {
                    rule: label(),
                    target: "single density",
                })
            }
        };
        Ok(DensityScorer { q, kind })
    }

    pub fn score_density(&self, x: &[f64], q: &DensityModel) -> Result<f64> {
        self.density_scorer(q)?.score(x)
    }
}

enum ScorerKind<'a> {
    Log,
    Hyvarinen,
    Tsallis { gamma: f64, constant: f64 },
    Quadratic { constant: f64 },
    Bregman { psi: &'a ConvexFn, integral: f64 },
}

/// A rule bound to one density, with integral terms already evaluated.
pub struct DensityScorer<'a> {
    q: &'a DensityModel,
    kind: ScorerKind<'a>,
}

impl DensityScorer<'_> {
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.q.check_point(x)?;
        let q = self.q;
        Ok(match &self.kind {
            ScorerKind::Log => -q.log_density(x),
            ScorerKind::Hyvarinen => {
                let grad = q.gradient_log_density(x)?;
                let lap = q.laplacian_log_density(x)?;
                lap + 0.5 * grad.iter().map(|g| g * g).sum::<f64>()
            }
            ScorerKind::Tsallis { gamma, constant } => {
                constant - gamma * ((gamma - 1.0) * q.log_density(x)).exp()
            }
            ScorerKind::Quadratic { constant } => constant - q.density(x),
            ScorerKind::Bregman { psi, integral } => {
                let v = -psi.derivative(q.density(x)) - integral;
                if v.is_nan() {
                    f64::INFINITY
                } else {
                    v
                }
            }
        })
    }
}

/// A quoted distribution of any supported kind.
#[derive(Debug, Clone, Copy)]
pub enum Quote<'a> {
    Discrete(&'a DiscreteDistribution),
    Joint(&'a JointDiscrete),
    Density(&'a DensityModel),
}

/// An observed outcome matching a [`Quote`] kind.
#[derive(Debug, Clone, Copy)]
pub enum Observation<'a> {
    Label(usize),
    Config(&'a [usize]),
    Point(&'a [f64]),
}

/// `S(x, Q)` for any matching observation/quote pair.
pub fn evaluate_score(rule: &RuleSpec, x: Observation<'_>, q: Quote<'_>) -> Result<f64> {
    match (x, q) {
        (Observation::Label(i), Quote::Discrete(d)) => rule.score_discrete(i, d),
        (Observation::Config(c), Quote::Joint(j)) => rule.score_joint(c, j),
        (Observation::Label(i), Quote::Joint(j)) => rule.score_joint(&j.decode(i), j),
        (Observation::Point(p), Quote::Density(m)) => rule.score_density(p, m),
        _ => Err(ScoreError::Specification(
            "observation kind does not match the quoted distribution".into(),
        )),
    }
}
