use serde::{Deserialize, Serialize};

use super::{NumericsError, Result};

/// Uniform grid on a closed interval, used as the integration measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    lower: f64,
    upper: f64,
    points: usize,
}

impl Grid1D {
    pub fn new(lower: f64, upper: f64, points: usize) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) {
            return Err(NumericsError::InvalidGrid(format!(
                "bounds must be finite, got [{lower}, {upper}]"
            )));
        }
        if lower >= upper {
            return Err(NumericsError::InvalidGrid(format!(
                "lower bound {lower} must be below upper bound {upper}"
            )));
        }
        if points < 2 {
            return Err(NumericsError::InvalidGrid(format!(
                "need at least 2 points, got {points}"
            )));
        }
        Ok(Self {
            lower,
            upper,
            points,
        })
    }

    /// Grid covering `center ± half_widths·scale`.
    pub fn centered(center: f64, scale: f64, half_widths: f64, points: usize) -> Result<Self> {
        Self::new(
            center - half_widths * scale,
            center + half_widths * scale,
            points,
        )
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn step(&self) -> f64 {
        (self.upper - self.lower) / (self.points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.upper
        } else {
            self.lower + i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(move |i| self.node(i))
    }

    /// Quadrature weights matching [`integrate`].
    pub fn weights(&self) -> Vec<f64> {
        simpson_weights(self.points, self.step())
    }
}

/// Composite Simpson weights for `points` equally spaced nodes.
///
/// An even number of intervals uses plain Simpson; an odd count closes the
/// last three intervals with the 3/8 rule; a single interval is a trapezoid.
pub fn simpson_weights(points: usize, h: f64) -> Vec<f64> {
    let intervals = points - 1;
    let mut w = vec![0.0; points];
    if intervals == 1 {
        w[0] = 0.5 * h;
        w[1] = 0.5 * h;
        return w;
    }
    let simpson_end = if intervals % 2 == 0 {
        intervals
    } else {
        intervals - 3
    };
    let mut i = 0;
    while i < simpson_end {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
        i += 2;
    }
    if simpson_end < intervals {
        let s = simpson_end;
        w[s] += 3.0 * h / 8.0;
        w[s + 1] += 9.0 * h / 8.0;
        w[s + 2] += 9.0 * h / 8.0;
        w[s + 3] += 3.0 * h / 8.0;
    }
    w
}

/// Composite Simpson approximation of the integral of `f` over the grid.
pub fn integrate<F>(f: F, grid: &Grid1D) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let weights = grid.weights();
    let mut total = 0.0;
    for (i, w) in weights.iter().enumerate() {
        let x = grid.node(i);
        let v = f(x);
        if !v.is_finite() {
            return Err(NumericsError::NonFiniteIntegrand { node: x, value: v });
        }
        total += w * v;
    }
    Ok(total)
}
