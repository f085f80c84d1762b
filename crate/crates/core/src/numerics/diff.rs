use super::{NumericsError, Result};

/// Default central-difference step for first derivatives at coordinate `xi`.
pub fn default_step(xi: f64) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + xi.abs())
}

/// Default step for second-order stencils (fourth root of machine epsilon).
pub fn second_order_step(xi: f64) -> f64 {
    f64::EPSILON.powf(0.25) * (1.0 + xi.abs())
}

fn checked(v: f64, point: &[f64]) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(NumericsError::NonFiniteStencil {
            point: point.to_vec(),
        })
    }
}

/// Central-difference gradient with a fixed step `h`.
pub fn finite_diff_gradient<F>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(NumericsError::InvalidStep(h));
    }
    finite_diff_gradient_with(f, x, |_| h)
}

/// Central-difference gradient with a per-coordinate step rule.
pub fn finite_diff_gradient_with<F, S>(f: F, x: &[f64], step: S) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
    S: Fn(f64) -> f64,
{
    let mut work = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = step(x[i]);
        if !(h > 0.0) {
            return Err(NumericsError::InvalidStep(h));
        }
        work[i] = x[i] + h;
        let up = checked(f(&work), &work)?;
        work[i] = x[i] - h;
        let down = checked(f(&work), &work)?;
        work[i] = x[i];
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Sum over axes of the three-point second-difference stencil.
pub fn finite_diff_laplacian<F>(f: F, x: &[f64], h: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(NumericsError::InvalidStep(h));
    }
    finite_diff_laplacian_with(f, x, |_| h)
}

pub fn finite_diff_laplacian_with<F, S>(f: F, x: &[f64], step: S) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
    S: Fn(f64) -> f64,
{
    let center = checked(f(x), x)?;
    let mut work = x.to_vec();
    let mut total = 0.0;
    for i in 0..x.len() {
        let h = step(x[i]);
        if !(h > 0.0) {
            return Err(NumericsError::InvalidStep(h));
        }
        work[i] = x[i] + h;
        let up = checked(f(&work), &work)?;
        work[i] = x[i] - h;
        let down = checked(f(&work), &work)?;
        work[i] = x[i];
        total += (up - 2.0 * center + down) / (h * h);
    }
    Ok(total)
}

/// Symmetric finite-difference Hessian, returned row-major.
pub fn finite_diff_hessian<F>(f: F, x: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let p = x.len();
    let steps: Vec<f64> = x.iter().map(|&v| second_order_step(v)).collect();
    let center = checked(f(x), x)?;
    let mut work = x.to_vec();
    let mut hess = vec![0.0; p * p];
    for i in 0..p {
        let hi = steps[i];
        work[i] = x[i] + hi;
        let up = checked(f(&work), &work)?;
        work[i] = x[i] - hi;
        let down = checked(f(&work), &work)?;
        work[i] = x[i];
        hess[i * p + i] = (up - 2.0 * center + down) / (hi * hi);
        for j in 0..i {
            let hj = steps[j];
            let mut eval = |si: f64, sj: f64| {
                work[i] = x[i] + si * hi;
                work[j] = x[j] + sj * hj;
                let v = f(&work);
                work[i] = x[i];
                work[j] = x[j];
                checked(v, x)
            };
            let pp = eval(1.0, 1.0)?;
            let pm = eval(1.0, -1.0)?;
            let mp = eval(-1.0, 1.0)?;
            let mm = eval(-1.0, -1.0)?;
            let v = (pp - pm - mp + mm) / (4.0 * hi * hj);
            hess[i * p + j] = v;
            hess[j * p + i] = v;
        }
    }
    Ok(hess)
}
