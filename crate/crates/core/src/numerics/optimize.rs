use serde::{Deserialize, Serialize};

use super::diff::{default_step, finite_diff_gradient_with, finite_diff_hessian};
use super::linalg::Matrix;
use super::{NumericsError, Result};

#[derive(Debug, Clone)]
pub struct MinimizeOptions {
    pub tolerance: f64,
    /// Cap on simplex iterations.
    pub max_iterations: usize,
    /// Per-coordinate size of the initial simplex; derived from `start` when absent.
    pub initial_step: Option<Vec<f64>>,
    /// Maximum number of gradient-polish steps after the simplex phase.
    pub polish_steps: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 10_000,
            initial_step: None,
            polish_steps: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub argmin: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
}

pub fn minimize<F>(objective: F, start: &[f64], tolerance: f64) -> Result<Minimum>
where
    F: Fn(&[f64]) -> f64,
{
    minimize_with(
        objective,
        start,
        &MinimizeOptions {
            tolerance,
            ..MinimizeOptions::default()
        },
    )
}

/// Nelder–Mead descent followed by a finite-difference Newton polish.
///
/// Points where the objective is infinite are treated as infeasible, which
/// is how box constraints are expressed by callers.
pub fn minimize_with<F>(objective: F, start: &[f64], options: &MinimizeOptions) -> Result<Minimum>
where
    F: Fn(&[f64]) -> f64,
{
    let eval = |x: &[f64]| {
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let f0 = eval(start);
    if !f0.is_finite() {
        return Err(NumericsError::NonFiniteStart);
    }
    if start.is_empty() {
        return Ok(Minimum {
            argmin: Vec::new(),
            value: f0,
            converged: true,
            iterations: 0,
            gradient_norm: 0.0,
        });
    }

    let tol = options.tolerance;
    let mut iterations = 0;
    let mut best = start.to_vec();
    let mut best_val = f0;
    let mut simplex_converged = false;
    // A restart from the best vertex guards against premature collapse.
    for round in 0..3 {
        let steps: Vec<f64> = match (&options.initial_step, round) {
            (Some(s), 0) => s.clone(),
            _ => best
                .iter()
                .map(|v| if round == 0 { 0.1 * v.abs().max(1.0) } else { 0.01 * v.abs().max(1.0) })
                .collect(),
        };
        let budget = options.max_iterations.saturating_sub(iterations);
        let run = nelder_mead(&eval, &best, best_val, &steps, tol, budget);
        iterations += run.iterations;
        let improved = best_val - run.value;
        if run.value <= best_val {
            best = run.point;
            best_val = run.value;
        }
        simplex_converged = run.converged;
        if !run.converged || (round > 0 && improved.abs() <= tol * (1.0 + best_val.abs())) {
            break;
        }
    }

    let polish = newton_polish(&eval, best, best_val, tol, options.polish_steps);
    Ok(Minimum {
        converged: simplex_converged && polish.converged,
        argmin: polish.point,
        value: polish.value,
        iterations,
        gradient_norm: polish.gradient_norm,
    })
}

struct SimplexRun {
    point: Vec<f64>,
    value: f64,
    converged: bool,
    iterations: usize,
}

fn nelder_mead<F>(f: &F, start: &[f64], f_start: f64, steps: &[f64], tol: f64, budget: usize) -> SimplexRun
where
    F: Fn(&[f64]) -> f64,
{
    let n = start.len();
    let mut vertices: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    vertices.push((start.to_vec(), f_start));
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += steps[i];
        let mut fv = f(&v);
        if !fv.is_finite() {
            v[i] = start[i] - steps[i];
            fv = f(&v);
        }
        vertices.push((v, fv));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < budget {
        vertices.sort_by(|a, b| a.1.total_cmp(&b.1));
        let f_best = vertices[0].1;
        let f_worst = vertices[n].1;
        let spread = f_worst - f_best;
        let diameter = vertices[1..]
            .iter()
            .map(|(v, _)| {
                v.iter()
                    .zip(&vertices[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let scale = 1.0 + vertices[0].0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if spread.is_finite() && spread <= tol * (1.0 + f_best.abs()) && diameter <= tol.sqrt() * scale {
            converged = true;
            break;
        }
        if diameter <= f64::EPSILON * scale {
            converged = spread.is_finite();
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (v, _) in &vertices[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&vertices[n].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let reflected = along(-1.0);
        let f_ref = f(&reflected);
        if f_ref < vertices[0].1 {
            let expanded = along(-2.0);
            let f_exp = f(&expanded);
            vertices[n] = if f_exp < f_ref {
                (expanded, f_exp)
            } else {
                (reflected, f_ref)
            };
        } else if f_ref < vertices[n - 1].1 {
            vertices[n] = (reflected, f_ref);
        } else {
            let (contracted, f_con) = if f_ref < vertices[n].1 {
                let c = along(-0.5);
                let fc = f(&c);
                (c, fc)
            } else {
                let c = along(0.5);
                let fc = f(&c);
                (c, fc)
            };
            if f_con < vertices[n].1.min(f_ref) {
                vertices[n] = (contracted, f_con);
            } else {
                let anchor = vertices[0].0.clone();
                for (v, fv) in vertices.iter_mut().skip(1) {
                    for (x, a) in v.iter_mut().zip(&anchor) {
                        *x = a + 0.5 * (*x - a);
                    }
                    *fv = f(v);
                }
            }
        }
    }
    vertices.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (point, value) = vertices.swap_remove(0);
    SimplexRun {
        point,
        value,
        converged,
        iterations,
    }
}

struct Polished {
    point: Vec<f64>,
    value: f64,
    converged: bool,
    gradient_norm: f64,
}

fn newton_polish<F>(f: &F, mut x: Vec<f64>, mut fx: f64, tol: f64, max_steps: usize) -> Polished
where
    F: Fn(&[f64]) -> f64,
{
    let grad_tol = tol.sqrt();
    let mut last_decrease = f64::INFINITY;
    let mut grad = match finite_diff_gradient_with(f, &x, default_step) {
        Ok(g) => g,
        Err(_) => {
            return Polished {
                point: x,
                value: fx,
                converged: false,
                gradient_norm: f64::INFINITY,
            }
        }
    };
    for _ in 0..max_steps {
        let gnorm = norm(&grad);
        if gnorm == 0.0 {
            last_decrease = 0.0;
            break;
        }
        let direction = newton_direction(f, &x, &grad).unwrap_or_else(|| grad.iter().map(|g| -g).collect());
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-12 {
            let trial: Vec<f64> = x.iter().zip(&direction).map(|(a, d)| a + t * d).collect();
            let ft = f(&trial);
            if ft < fx {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, ft)) = accepted else {
            last_decrease = 0.0;
            break;
        };
        last_decrease = fx - ft;
        x = trial;
        fx = ft;
        grad = match finite_diff_gradient_with(f, &x, default_step) {
            Ok(g) => g,
            Err(_) => {
                return Polished {
                    point: x,
                    value: fx,
                    converged: false,
                    gradient_norm: f64::INFINITY,
                }
            }
        };
        if last_decrease < tol && norm(&grad) < grad_tol {
            break;
        }
    }
    let gradient_norm = norm(&grad);
    Polished {
        point: x,
        value: fx,
        converged: last_decrease < tol && gradient_norm < grad_tol,
        gradient_norm,
    }
}

fn newton_direction<F>(f: &F, x: &[f64], grad: &[f64]) -> Option<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let p = x.len();
    let hess = finite_diff_hessian(f, x).ok()?;
    let h = Matrix::new(p, p, hess).ok()?;
    let step = h.solve_spd(grad).ok()?;
    let d: Vec<f64> = step.iter().map(|v| -v).collect();
    d.iter().all(|v| v.is_finite()).then_some(d)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn shifted_parabola() {
        let m = minimize(|x| (x[0] - 2.0).powi(2), &[0.0], 1e-12).unwrap();
        assert!(m.converged);
        assert_abs_diff_eq!(m.argmin[0], 2.0, epsilon = 1e-6);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = minimize(f, &[-1.2, 1.0], 1e-12).unwrap();
        assert!(m.converged);
        assert_abs_diff_eq!(m.argmin[0], 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(m.argmin[1], 1.0, epsilon = 1e-4);
    }

    #[test]
    fn constant_objective_stays_put() {
        let m = minimize(|_| 3.5, &[0.4, -7.0], 1e-10).unwrap();
        assert!(m.converged);
        assert_eq!(m.argmin, vec![0.4, -7.0]);
        assert_eq!(m.value, 3.5);
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let r = minimize(|x| if x[0] < 0.0 { f64::INFINITY } else { x[0] }, &[-1.0], 1e-8);
        assert!(matches!(r, Err(NumericsError::NonFiniteStart)));
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = MinimizeOptions {
            tolerance: 1e-12,
            max_iterations: 5,
            initial_step: None,
            polish_steps: 0,
        };
        let m = minimize_with(f, &[-1.2, 1.0], &opts).unwrap();
        assert!(!m.converged);
        assert!(m.value <= f(&[-1.2, 1.0]));
    }

    #[test]
    fn respects_infeasible_region() {
        // minimum of (x-2)^2 restricted to x <= 1
        let f = |x: &[f64]| if x[0] > 1.0 { f64::INFINITY } else { (x[0] - 2.0).powi(2) };
        let m = minimize(f, &[0.0], 1e-10).unwrap();
        assert!(m.argmin[0] <= 1.0);
        assert!((m.argmin[0] - 1.0).abs() < 1e-3);
    }
}
