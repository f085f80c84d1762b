use serde::Serialize;

use crate::scores::RuleSpec;

use super::bayes::{hyvarinen_predictive_score, marginal_density, BayesModelSpec};
use super::linear::NormalLinearModel;
use super::{ModelSelError, Result};

/// `S(x₀, P_M)` for a model's marginal distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginalScore {
    pub value: f64,
    /// The value depends on an arbitrary constant of an improper prior.
    pub scale_arbitrary: bool,
}

/// A model that can score the observed data under its marginal. The log
/// and Hyvärinen rules are supported.
pub trait MarginalModel: Send + Sync {
    fn label(&self) -> String;

    fn marginal_score(&self, rule: &RuleSpec, data: &[Vec<f64>]) -> Result<MarginalScore>;
}

fn unsupported(rule: &RuleSpec) -> ModelSelError {
    ModelSelError::UnsupportedRule { rule: rule.label() }
}

impl MarginalModel for BayesModelSpec {
    fn label(&self) -> String {
        BayesModelSpec::label(self).to_string()
    }

    fn marginal_score(&self, rule: &RuleSpec, data: &[Vec<f64>]) -> Result<MarginalScore> {
        match rule {
            RuleSpec::Log => {
                let m = marginal_density(self, data)?;
                Ok(MarginalScore {
                    value: -m.log_value,
                    scale_arbitrary: m.scale_arbitrary,
                })
            }
            RuleSpec::Hyvarinen => Ok(MarginalScore {
                value: hyvarinen_predictive_score(self, data)?,
                scale_arbitrary: false,
            }),
            other => Err(unsupported(other)),
        }
    }
}

/// The response is the concatenation of all observation rows. Hyvärinen
/// values are halved from the doubled linear-model scale so that they agree
/// with every other Hyvärinen score in the crate.
impl MarginalModel for NormalLinearModel {
    fn label(&self) -> String {
        format!("linear(p={})", self.p())
    }

    fn marginal_score(&self, rule: &RuleSpec, data: &[Vec<f64>]) -> Result<MarginalScore> {
        let y: Vec<f64> = data.iter().flatten().copied().collect();
        match rule {
            RuleSpec::Log => {
                let (value, scale_arbitrary) = self.log_score(&y)?;
                Ok(MarginalScore {
                    value,
                    scale_arbitrary,
                })
            }
            RuleSpec::Hyvarinen => Ok(MarginalScore {
                value: 0.5 * self.doubled_hyvarinen(&y)?,
                scale_arbitrary: false,
            }),
            other => Err(unsupported(other)),
        }
    }
}

/// `SD = S(x₀, P_A) − S(x₀, P_B)`. Refused when either value carries the
/// arbitrary constant of an improper prior.
pub fn score_difference<A, B>(rule: &RuleSpec, a: &A, b: &B, data: &[Vec<f64>]) -> Result<f64>
where
    A: MarginalModel + ?Sized,
    B: MarginalModel + ?Sized,
{
    let sa = a.marginal_score(rule, data)?;
    let sb = b.marginal_score(rule, data)?;
    for (s, m) in [(sa, a.label()), (sb, b.label())] {
        if s.scale_arbitrary {
            return Err(ModelSelError::ImproperPrior {
                model: m,
                operation: "a score difference under a non-homogeneous rule",
            });
        }
    }
    Ok(sa.value - sb.value)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelEntry {
    pub model_id: String,
    pub score: Option<f64>,
    pub scale_arbitrary: bool,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDifference {
    pub a: usize,
    pub b: usize,
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelComparisonReport {
    pub rule: String,
    pub models: Vec<ModelEntry>,
    /// `SD^a_b` for every ordered pair of comparable models.
    pub differences: Vec<PairDifference>,
    /// Comparable models by ascending score (lower is better).
    pub ranking: Vec<usize>,
    /// Pairs `(a, b)`, `a < b`, with equal scores.
    pub ties: Vec<(usize, usize)>,
}

impl ModelComparisonReport {
    /// Dense `SD` matrix; `None` where either model is not comparable.
    pub fn difference_matrix(&self) -> Vec<Vec<Option<f64>>> {
        let n = self.models.len();
        let mut out = vec![vec![None; n]; n];
        for d in &self.differences {
            out[d.a][d.b] = Some(d.difference);
        }
        out
    }

    pub fn winner(&self) -> Option<usize> {
        self.ranking.first().copied()
    }
}

/// Score every model on the same data. A model that fails is reported
/// with its error and left out of the differences and the ranking, as is
/// any model whose score is scale-arbitrary.
pub fn compare_models(rule: &RuleSpec, models: &[&dyn MarginalModel], data: &[Vec<f64>]) -> ModelComparisonReport {
    let entries: Vec<ModelEntry> = models
        .iter()
        .map(|m| match m.marginal_score(rule, data) {
            Ok(s) => ModelEntry {
                model_id: m.label(),
                score: Some(s.value),
                scale_arbitrary: s.scale_arbitrary,
                errors: Vec::new(),
            },
            Err(e) => ModelEntry {
                model_id: m.label(),
                score: None,
                scale_arbitrary: false,
                errors: vec![e.to_string()],
            },
        })
        .collect();
    report_from_entries(rule.label(), entries)
}

/// Assemble a report from already computed entries, for callers that
/// score the models themselves (for example in parallel).
pub fn report_from_entries(rule: String, entries: Vec<ModelEntry>) -> ModelComparisonReport {
    let comparable: Vec<(usize, f64)> = entries
        .iter()
        .enumerate()
        .filter(|(_, e)| !e.scale_arbitrary)
        .filter_map(|(i, e)| e.score.filter(|s| !s.is_nan()).map(|s| (i, s)))
        .collect();
    let mut differences = Vec::new();
    let mut ties = Vec::new();
    for (k, &(a, sa)) in comparable.iter().enumerate() {
        for &(b, sb) in &comparable[k + 1..] {
            let d = sa - sb;
            differences.push(PairDifference { a, b, difference: d });
            differences.push(PairDifference {
                a: b,
                b: a,
                difference: -d,
            });
            if sa == sb {
                ties.push((a, b));
            }
        }
    }
    differences.sort_by_key(|d| (d.a, d.b));
    let mut ranking = comparable.clone();
    ranking.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
    ModelComparisonReport {
        rule,
        models: entries,
        differences,
        ranking: ranking.into_iter().map(|(i, _)| i).collect(),
        ties,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::LocationFamily;
    use crate::modelsel::{log_bayes_factor, Prior};

    fn normal_model(label: &str, var: f64) -> BayesModelSpec {
        BayesModelSpec::new(label, LocationFamily::normal(1.0), Prior::normal(vec![0.0], vec![var]).unwrap(), vec![(-15.0, 15.0)])
            .unwrap()
    }

    #[test]
    fn single_and_duplicate_models() {
        let a = normal_model("a", 1.0);
        let data = [vec![0.4]];
        let r = compare_models(&RuleSpec::Hyvarinen, &[&a], &data);
        assert_eq!(r.ranking, vec![0]);
        assert!(r.differences.is_empty());
        let r = compare_models(&RuleSpec::Hyvarinen, &[&a, &a], &data);
        assert_eq!(r.difference_matrix()[0][1], Some(0.0));
        assert_eq!(r.ties, vec![(0, 1)]);
    }

    #[test]
    fn log_rule_matches_bayes_factor() {
        let (a, b) = (normal_model("a", 1.0), normal_model("b", 9.0));
        let data = [vec![2.5]];
        let sd = score_difference(&RuleSpec::Log, &a, &b, &data).unwrap();
        assert!((sd + log_bayes_factor(&a, &b, &data).unwrap()).abs() < 1e-6);
        let r = compare_models(&RuleSpec::Log, &[&a, &b], &data);
        // larger marginal likelihood ranks first
        let expected = if log_bayes_factor(&a, &b, &data).unwrap() > 0.0 { 0 } else { 1 };
        assert_eq!(r.winner(), Some(expected));
        for d in &r.differences {
            let back = r.difference_matrix()[d.b][d.a].unwrap();
            assert_eq!(d.difference + back, 0.0);
        }
    }

    #[test]
    fn errors_do_not_abort_the_run() {
        let a = normal_model("a", 1.0);
        let flat = BayesModelSpec::new("flat", LocationFamily::normal(1.0), Prior::flat(), vec![(-15.0, 15.0)]).unwrap();
        let data = [vec![0.4]];
        let r = compare_models(&RuleSpec::Brier, &[&a], &data);
        assert_eq!(r.models[0].errors.len(), 1);
        assert!(r.ranking.is_empty());
        let r = compare_models(&RuleSpec::Log, &[&a, &flat], &data);
        assert!(r.models[1].scale_arbitrary);
        assert_eq!(r.ranking, vec![0]);
        assert!(score_difference(&RuleSpec::Log, &a, &flat, &data).is_err());
        assert!(score_difference(&RuleSpec::Hyvarinen, &a, &flat, &data).is_ok());
    }
}
