//! Monotone piecewise-cubic interpolation (Fritsch-Carlson tangents) over
//! strictly increasing data, with a numeric inverse.
//!
//! The tangent limiter keeps every Hermite segment monotone, so the
//! interpolant is C1, strictly increasing and globally invertible.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    tangents: Vec<f64>,
}

impl MonotoneCubic {
    /// Builds the interpolant. Both coordinate vectors must be strictly
    /// increasing and of equal length >= 2.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::config("interpolation needs >= 2 matched points"));
        }
        for w in xs.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::config("abscissae must be strictly increasing"));
            }
        }
        for w in ys.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::config("ordinates must be strictly increasing"));
            }
        }
        let n = xs.len();
        let mut secants = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            secants.push((ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]));
        }
        let mut tangents = vec![0.0; n];
        tangents[0] = secants[0];
        tangents[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            tangents[i] = 0.5 * (secants[i - 1] + secants[i]);
        }
        // Fritsch-Carlson limiter. Secants are all positive here.
        for i in 0..n - 1 {
            let a = tangents[i] / secants[i];
            let b = tangents[i + 1] / secants[i];
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                tangents[i] = tau * a * secants[i];
                tangents[i + 1] = tau * b * secants[i];
            }
        }
        Ok(MonotoneCubic { xs, ys, tangents })
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    pub fn y_min(&self) -> f64 {
        self.ys[0]
    }

    pub fn y_max(&self) -> f64 {
        *self.ys.last().unwrap()
    }

    fn segment_of_x(&self, x: f64) -> usize {
        match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.xs.len() - 2),
        }
    }

    /// Evaluates the interpolant, clamping outside the tabulated range.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.x_min() {
            return self.ys[0];
        }
        if x >= self.x_max() {
            return *self.ys.last().unwrap();
        }
        let i = self.segment_of_x(x);
        self.eval_segment(i, x)
    }

    fn eval_segment(&self, i: usize, x: f64) -> f64 {
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.tangents[i] + h01 * self.ys[i + 1]
            + h11 * h * self.tangents[i + 1]
    }

    /// Inverse lookup. Returns the clamp flag when `y` falls outside the
    /// tabulated range (the result is then the nearest endpoint).
    pub fn invert(&self, y: f64) -> (f64, bool) {
        if y <= self.y_min() {
            return (self.xs[0], y < self.y_min());
        }
        if y >= self.y_max() {
            return (*self.xs.last().unwrap(), y > self.y_max());
        }
        let i = match self.ys.binary_search_by(|v| v.partial_cmp(&y).unwrap()) {
            Ok(i) => return (self.xs[i], false),
            Err(i) => i - 1,
        };
        // Bisection with a Newton polish; the segment cubic is monotone.
        let (mut lo, mut hi) = (self.xs[i], self.xs[i + 1]);
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = self.eval_segment(i, x) - y;
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            x = 0.5 * (lo + hi);
            if hi - lo <= 1e-14 * (1.0 + x.abs()) {
                break;
            }
        }
        (x, false)
    }
}
