//! Name lookup for rules and families. Unknown names are rejected with the
//! list of known ones.

use std::sync::Arc;

use scorelab::estimation::{BernoulliFamily, LocationFamily, LocationShape, NormalFamily, ParametricFamily};
use scorelab::scores::{rule_from_loss, ConvexFn, LossTable, RuleFamily, RuleParams, RuleSpec};

use crate::error::CliError;

pub const FAMILIES: [&str; 6] = [
    "normal-location",
    "logistic-location",
    "cauchy-location",
    "extreme-value-location",
    "normal",
    "bernoulli",
];

/// `<shape>-location` with the given scale, `normal` with `θ = (μ, σ)`, or
/// `bernoulli`.
pub fn family(name: &str, scale: f64) -> Result<Arc<dyn ParametricFamily>, CliError> {
    let key = name.trim().to_ascii_lowercase();
    if let Some(shape) = key.strip_suffix("-location") {
        if let Some(shape) = LocationShape::from_name(shape) {
            let f = LocationFamily::new(shape, scale).map_err(|e| CliError::Validation(e.to_string()))?;
            return Ok(Arc::new(f));
        }
    }
    match key.as_str() {
        "normal" => Ok(Arc::new(NormalFamily)),
        "bernoulli" => Ok(Arc::new(BernoulliFamily)),
        _ => Err(CliError::Validation(format!(
            "unknown family {name:?}; known families: {}",
            FAMILIES.join(", ")
        ))),
    }
}

/// Build a rule from its command-line name. `support` sizes the 0–1 loss
/// behind `from-loss`.
pub fn rule(name: &str, gamma: Option<f64>, psi: Option<&str>, support: Option<usize>) -> Result<RuleSpec, CliError> {
    let family: RuleFamily = name.parse()?;
    let psi = psi.map(ConvexFn::from_name).transpose()?;
    match family {
        RuleFamily::FromLoss => {
            let k = support.ok_or_else(|| {
                CliError::Validation("the from-loss rule (0–1 loss) needs a known outcome count".into())
            })?;
            Ok(rule_from_loss(LossTable::zero_one(k)))
        }
        RuleFamily::Composite | RuleFamily::Pseudo => Err(CliError::Validation(format!(
            "the {family} rule is only available through the library"
        ))),
        _ => Ok(RuleSpec::build(
            family,
            RuleParams {
                gamma,
                psi,
                ..RuleParams::default()
            },
        )?),
    }
}
