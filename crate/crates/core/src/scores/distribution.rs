use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{Result, ScoreError};

const SUM_TOLERANCE: f64 = 1e-12;

/// Probability vector over a finite, labelled support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    support: Vec<String>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(support: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(ScoreError::InvalidDistribution("empty support".into()));
        }
        if support.len() != probs.len() {
            return Err(ScoreError::InvalidDistribution(format!(
                "{} labels for {} probabilities",
                support.len(),
                probs.len()
            )));
        }
        let mut seen = HashSet::new();
        for label in &support {
            if !seen.insert(label.as_str()) {
                return Err(ScoreError::InvalidDistribution(format!(
                    "duplicate label {label:?}"
                )));
            }
        }
        for (label, p) in support.iter().zip(&probs) {
            if !p.is_finite() || *p < 0.0 {
                return Err(ScoreError::InvalidDistribution(format!(
                    "probability of {label:?} is {p}"
                )));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(ScoreError::InvalidDistribution(format!(
                "probabilities sum to {sum}"
            )));
        }
        Ok(Self { support, probs })
    }

    /// Distribution with labels `"0"`, `"1"`, ….
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        let support = (0..probs.len()).map(|i| i.to_string()).collect();
        Self::new(support, probs)
    }

    pub fn uniform(size: usize) -> Result<Self> {
        Self::from_probs(vec![1.0 / size as f64; size])
    }

    /// Two-point distribution on `{"0", "1"}` with `P(1) = q`.
    pub fn bernoulli(q: f64) -> Result<Self> {
        Self::from_probs(vec![1.0 - q, q])
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn support(&self) -> &[String] {
        &self.support
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.support.iter().position(|l| l == label)
    }

    /// `alpha·a + (1 − alpha)·b` on a shared support.
    pub fn mixture(a: &Self, alpha: f64, b: &Self) -> Result<Self> {
        if a.support != b.support {
            return Err(ScoreError::InvalidDistribution(
                "mixture components have different supports".into(),
            ));
        }
        let probs = a
            .probs
            .iter()
            .zip(&b.probs)
            .map(|(p, q)| alpha * p + (1.0 - alpha) * q)
            .collect();
        Self::new(a.support.clone(), probs)
    }

    pub(crate) fn check_index(&self, index: usize) -> Result<()> {
        if index < self.len() {
            Ok(())
        } else {
            Err(ScoreError::OutOfSupport {
                index,
                size: self.len(),
            })
        }
    }
}

/// Joint distribution of several finite variables, stored as a flat
/// distribution over configurations in row-major order (the first variable
/// varies slowest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDiscrete {
    radices: Vec<usize>,
    dist: DiscreteDistribution,
}

impl JointDiscrete {
    pub fn new(radices: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if radices.is_empty() || radices.contains(&0) {
            return Err(ScoreError::InvalidDistribution(format!(
                "invalid variable cardinalities {radices:?}"
            )));
        }
        let size: usize = radices.iter().product();
        if size != probs.len() {
            return Err(ScoreError::InvalidDistribution(format!(
                "cardinalities {radices:?} need {size} probabilities, got {}",
                probs.len()
            )));
        }
        let support = (0..size)
            .map(|i| {
                decode(&radices, i)
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect();
        Ok(Self {
            dist: DiscreteDistribution::new(support, probs)?,
            radices,
        })
    }

    pub fn from_distribution(dist: DiscreteDistribution) -> Self {
        Self {
            radices: vec![dist.len()],
            dist,
        }
    }

    /// Product of independent marginals.
    pub fn independent(marginals: &[DiscreteDistribution]) -> Result<Self> {
        let radices: Vec<usize> = marginals.iter().map(DiscreteDistribution::len).collect();
        let size: usize = radices.iter().product();
        let probs = (0..size)
            .map(|i| {
                decode(&radices, i)
                    .iter()
                    .zip(marginals)
                    .map(|(&s, m)| m.prob(s))
                    .product()
            })
            .collect();
        Self::new(radices, probs)
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn variables(&self) -> usize {
        self.radices.len()
    }

    pub fn flat(&self) -> &DiscreteDistribution {
        &self.dist
    }

    pub fn encode(&self, config: &[usize]) -> Result<usize> {
        if config.len() != self.radices.len() {
            return Err(ScoreError::DimensionMismatch {
                expected: self.radices.len(),
                got: config.len(),
            });
        }
        let mut index = 0;
        for (&s, &r) in config.iter().zip(&self.radices) {
            if s >= r {
                return Err(ScoreError::OutOfSupport { index: s, size: r });
            }
            index = index * r + s;
        }
        Ok(index)
    }

    pub fn decode(&self, index: usize) -> Vec<usize> {
        decode(&self.radices, index)
    }

    pub fn prob(&self, config: &[usize]) -> Result<f64> {
        Ok(self.dist.prob(self.encode(config)?))
    }

    /// Marginal over the listed variables, in the order given.
    pub fn marginal(&self, subset: &[usize]) -> Result<JointDiscrete> {
        if subset.is_empty() {
            return Err(ScoreError::Specification("empty variable subset".into()));
        }
        let mut seen = HashSet::new();
        for &v in subset {
            if v >= self.variables() || !seen.insert(v) {
                return Err(ScoreError::Specification(format!(
                    "invalid variable subset {subset:?} for {} variables",
                    self.variables()
                )));
            }
        }
        let radices: Vec<usize> = subset.iter().map(|&v| self.radices[v]).collect();
        let size: usize = radices.iter().product();
        let mut probs = vec![0.0; size];
        for (i, p) in self.dist.probs().iter().enumerate() {
            let config = self.decode(i);
            let mut j = 0;
            for (&v, &r) in subset.iter().zip(&radices) {
                j = j * r + config[v];
            }
            probs[j] += p;
        }
        renormalize(&mut probs);
        Self::new(radices, probs)
    }

    /// Full conditional of variable `site` given the other coordinates of `config`.
    pub fn conditional(&self, site: usize, config: &[usize]) -> Result<DiscreteDistribution> {
        self.encode(config)?;
        let mut work = config.to_vec();
        let weights: Vec<f64> = (0..self.radices[site])
            .map(|s| {
                work[site] = s;
                self.dist.prob(self.encode(&work).expect("validated configuration"))
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(ScoreError::ZeroProbabilityCondition { site });
        }
        let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        renormalize(&mut probs);
        DiscreteDistribution::from_probs(probs)
    }
}

fn decode(radices: &[usize], mut index: usize) -> Vec<usize> {
    let mut config = vec![0; radices.len()];
    for (slot, &r) in config.iter_mut().zip(radices).rev() {
        *slot = index % r;
        index /= r;
    }
    config
}

/// Absorb rounding so the vector sums to one within the constructor tolerance.
fn renormalize(probs: &mut [f64]) {
    let total: f64 = probs.iter().sum();
    if total > 0.0 {
        probs.iter_mut().for_each(|p| *p /= total);
    }
}
