use serde::Serialize;

use crate::scores::ConvexFn;

use super::LocationShape;

/// Grid settings for [`brobustness_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessOptions {
    /// Half-width `W` of the first grid `[−W, W]`.
    pub grid_halfwidth: f64,
    /// Number of times `W` is doubled.
    pub growth_rounds: usize,
    /// Nodes per unit `W` of the first grid; the spacing stays fixed so that
    /// every grid contains the previous one.
    pub nodes_per_halfwidth: usize,
}

impl Default for RobustnessOptions {
    fn default() -> Self {
        Self {
            grid_halfwidth: 4.0,
            growth_rounds: 3,
            nodes_per_halfwidth: 1000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RobustnessReport {
    pub psi: String,
    pub shape: String,
    /// `sup |ψ″(f(u)) f′(u)|` on the widest grid; infinite when any node gives
    /// a non-finite value.
    pub sup_abs_score_gradient: f64,
    pub grid_max_location: f64,
    /// Running maximum after each grid.
    pub round_maxima: Vec<f64>,
    pub classified_bounded: bool,
    /// `f′` bounded; holds for every shipped shape.
    pub condition1_f: bool,
    /// `ψ″` bounded near zero.
    pub condition1_psi: bool,
}

const STABLE: f64 = 1e-6;

/// Decide numerically whether the location-model score `ψ″(f(u)) f′(u)` is
/// bounded in `u`, by watching its running maximum over growing grids.
pub fn brobustness_check(psi: &ConvexFn, shape: LocationShape, options: RobustnessOptions) -> RobustnessReport {
    let h = options.grid_halfwidth / options.nodes_per_halfwidth as f64;
    let mut best = (0.0f64, 0.0f64);
    let mut maxima = Vec::with_capacity(options.growth_rounds + 1);
    let mut reached = 0i64;
    let mut infinite = false;
    for round in 0..=options.growth_rounds {
        let half_nodes = (options.nodes_per_halfwidth << round) as i64;
        // only the nodes not covered by the previous grid are new
        let mut visit = |k: i64| {
            let u = k as f64 * h;
            let t = shape.f(u);
            let v = (psi.second_derivative(t) * shape.f_prime(u)).abs();
            if !v.is_finite() {
                infinite = true;
                if best.0.is_finite() {
                    best = (f64::INFINITY, u);
                }
            } else if v > best.0 {
                best = (v, u);
            }
        };
        if round == 0 {
            for k in -half_nodes..=half_nodes {
                visit(k);
            }
        } else {
            for k in (reached + 1)..=half_nodes {
                visit(k);
                visit(-k);
            }
        }
        reached = half_nodes;
        maxima.push(best.0);
    }
    let classified_bounded = !infinite
        && match maxima.as_slice() {
            [.., prev, last] => (last - prev).abs() <= STABLE * last.abs().max(f64::MIN_POSITIVE),
            _ => false,
        };
    RobustnessReport {
        psi: psi.name().to_string(),
        shape: shape.name().to_string(),
        sup_abs_score_gradient: best.0,
        grid_max_location: best.1,
        round_maxima: maxima,
        classified_bounded,
        condition1_f: true,
        condition1_psi: psi.curvature_bounded_near_zero(),
    }
}
