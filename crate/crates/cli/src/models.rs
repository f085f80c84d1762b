//! Model-set files for `compare` and `preq`.
//!
//! ```json
//! { "models": [
//!     { "id": "intercept", "family": "normal-linear", "design": "x1.csv",
//!       "sigma2": 1.0, "prior": "flat" },
//!     { "id": "slope", "family": "normal-linear", "design": "x2.csv",
//!       "sigma2": 1.0, "prior": { "normal": { "mean": [0, 0], "cov": [[100, 0], [0, 100]] } } },
//!     { "id": "fixed", "family": "normal-location", "sigma2": 1.0,
//!       "prior": { "point": [0.0] } }
//! ] }
//! ```
//!
//! Design paths are relative to the model-set file.

use std::path::{Path, PathBuf};

use scorelab::modelsel::{BayesModelSpec, LinearPrior, MarginalModel, MarginalScore, NormalLinearModel, Prior};
use scorelab::numerics::Matrix;
use scorelab::scores::RuleSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::ingest::{read_table, Schema};
use crate::registry;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorSpec {
    Flat,
    Normal { mean: Vec<f64>, cov: Vec<Vec<f64>> },
    Point(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntrySpec {
    pub id: String,
    pub family: String,
    #[serde(default)]
    pub design: Option<PathBuf>,
    pub prior: PriorSpec,
    pub sigma2: f64,
    /// Quadrature box for the parameter of a location model.
    #[serde(default)]
    pub domain: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSetFile {
    pub models: Vec<ModelEntrySpec>,
}

/// A model after its files were read. Construction itself can still fail
/// (a rank-deficient design, say); that failure belongs to the model and is
/// reported with it rather than aborting the run.
pub struct LoadedModel {
    pub id: String,
    pub model: Result<Built, String>,
}

pub enum Built {
    Linear(NormalLinearModel),
    Bayes(BayesModelSpec),
}

impl Built {
    pub fn score(&self, rule: &RuleSpec, data: &[Vec<f64>]) -> Result<MarginalScore, String> {
        let r = match self {
            Built::Linear(m) => m.marginal_score(rule, data),
            Built::Bayes(m) => m.marginal_score(rule, data),
        };
        r.map_err(|e| e.to_string())
    }
}

/// Quadrature settings taken from the command line when a location model
/// gives none.
#[derive(Debug, Clone, Copy)]
pub struct GridDefaults {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub points: Option<usize>,
}

pub fn load(path: &Path, grid: GridDefaults, data: &[f64]) -> Result<Vec<LoadedModel>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ModelSetFile = serde_json::from_str(&text).map_err(|source| CliError::ModelSet {
        path: path.to_path_buf(),
        source,
    })?;
    if file.models.is_empty() {
        return Err(CliError::Validation(format!("{}: no models listed", path.display())));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    // read every referenced file before any model is built
    let mut designs = Vec::with_capacity(file.models.len());
    for spec in &file.models {
        let design = match (&spec.design, spec.family.as_str()) {
            (Some(d), "normal-linear") => {
                let schema = Schema::any_width("one column per regressor, one row per observation");
                Some(Matrix::from_rows(&read_table(&base.join(d), &schema)?.rows).map_err(|e| CliError::Validation(e.to_string()))?)
            }
            (None, "normal-linear") => {
                return Err(CliError::Validation(format!("model {:?}: a normal-linear model needs a design file", spec.id)))
            }
            (Some(_), other) => {
                return Err(CliError::Validation(format!("model {:?}: family {other:?} takes no design file", spec.id)))
            }
            (None, _) => None,
        };
        designs.push(design);
    }
    Ok(file
        .models
        .into_iter()
        .zip(designs)
        .map(|(spec, design)| LoadedModel {
            id: spec.id.clone(),
            model: build(&spec, design, grid, data),
        })
        .collect())
}

fn build(spec: &ModelEntrySpec, design: Option<Matrix>, grid: GridDefaults, data: &[f64]) -> Result<Built, String> {
    if !(spec.sigma2 > 0.0 && spec.sigma2.is_finite()) {
        return Err(format!("σ² must be positive, got {}", spec.sigma2));
    }
    if let Some(x) = design {
        let prior = match &spec.prior {
            PriorSpec::Flat => LinearPrior::Flat,
            PriorSpec::Normal { mean, cov } => LinearPrior::Normal {
                mean: mean.clone(),
                cov: Matrix::from_rows(cov).map_err(|e| e.to_string())?,
            },
            PriorSpec::Point(theta) => LinearPrior::Point { theta: theta.clone() },
        };
        let model = NormalLinearModel::new(x, spec.sigma2)
            .and_then(|m| m.with_prior(prior))
            .map_err(|e| e.to_string())?;
        return Ok(Built::Linear(model));
    }
    let family = registry::family(&spec.family, spec.sigma2.sqrt()).map_err(|e| e.to_string())?;
    let prior = match &spec.prior {
        PriorSpec::Flat => Prior::flat(),
        PriorSpec::Normal { mean, cov } => {
            let k = mean.len();
            if cov.len() != k || cov.iter().any(|r| r.len() != k) {
                return Err(format!("prior covariance must be {k}×{k}"));
            }
            for (i, row) in cov.iter().enumerate() {
                if row.iter().enumerate().any(|(j, v)| i != j && *v != 0.0) {
                    return Err("priors for location models must have a diagonal covariance".into());
                }
            }
            Prior::normal(mean.clone(), (0..k).map(|i| cov[i][i]).collect()).map_err(|e| e.to_string())?
        }
        PriorSpec::Point(theta) => Prior::point(theta.clone()),
    };
    let domain = match &spec.domain {
        Some(d) => d.iter().map(|[lo, hi]| (*lo, *hi)).collect(),
        None => {
            let dim = family.dimension();
            let spread = 10.0 * spec.sigma2.sqrt();
            let lo = grid.lo.unwrap_or_else(|| data.iter().copied().fold(f64::INFINITY, f64::min) - spread);
            let hi = grid.hi.unwrap_or_else(|| data.iter().copied().fold(f64::NEG_INFINITY, f64::max) + spread);
            vec![(lo, hi); dim]
        }
    };
    let mut model = BayesModelSpec::from_arc(spec.id.clone(), family, prior, domain).map_err(|e| e.to_string())?;
    if let Some(p) = spec.points.or(grid.points) {
        model = model.with_points(p);
    }
    Ok(Built::Bayes(model))
}
