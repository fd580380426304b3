//! Sigmoid activation functions and their measured derivative bounds.
//!
//! Two kinds are supported: the logistic function `1 / (1 + e^{-x})` with
//! closed-form derivatives, and a user-tabulated curve interpolated by a
//! monotone cubic Hermite spline (Fritsch–Carlson slopes) that is held
//! constant outside the table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the grid on which derivative bounds are measured.
pub const BOUND_GRID_HALF_WIDTH: f64 = 50.0;
const BOUND_GRID_POINTS: usize = 100_001;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmoidSpec {
    #[default]
    Logistic,
    Tabulated(TabulatedSigmoid),
}

/// Monotone interpolant through `(x_k, y_k)` knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct TabulatedSigmoid {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl TryFrom<Vec<(f64, f64)>> for TabulatedSigmoid {
    type Error = Error;

    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        TabulatedSigmoid::new(points)
    }
}

impl From<TabulatedSigmoid> for Vec<(f64, f64)> {
    fn from(t: TabulatedSigmoid) -> Self {
        t.xs.into_iter().zip(t.ys).collect()
    }
}

impl TabulatedSigmoid {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("sigmoid.tabulated", "need at least two knots"));
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::invalid("sigmoid.tabulated", "knots must be finite"));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "sigmoid.tabulated",
                "abscissae must be strictly increasing",
            ));
        }
        if ys.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "sigmoid.tabulated",
                "values must be strictly increasing",
            ));
        }
        if ys.iter().any(|&y| y <= 0.0 || y >= 1.0) {
            return Err(Error::invalid(
                "sigmoid.tabulated",
                "values must lie strictly inside (0, 1)",
            ));
        }

        let k = xs.len();
        let secants: Vec<f64> = (0..k - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        // Zero end slopes join the constant tails with a continuous derivative.
        let mut slopes = vec![0.0; k];
        for i in 1..k - 1 {
            let (a, b) = (secants[i - 1], secants[i]);
            let (ha, hb) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
            let (wa, wb) = (2.0 * hb + ha, hb + 2.0 * ha);
            slopes[i] = (wa + wb) / (wa / a + wb / b);
        }
        for i in 0..k - 1 {
            let d = secants[i];
            let (a, b) = (slopes[i] / d, slopes[i + 1] / d);
            let r = a.hypot(b);
            if r > 3.0 {
                slopes[i] = 3.0 * a / r * d;
                slopes[i + 1] = 3.0 * b / r * d;
            }
        }
        Ok(TabulatedSigmoid { xs, ys, slopes })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    /// Returns value, first and second derivative at `x`.
    fn eval_all(&self, x: f64) -> (f64, f64, f64) {
        let last = self.xs.len() - 1;
        if x <= self.xs[0] {
            return (self.ys[0], 0.0, 0.0);
        }
        if x >= self.xs[last] {
            return (self.ys[last], 0.0, 0.0);
        }
        let i = self.xs.partition_point(|&k| k <= x) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let value = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1;
        let d1 = (6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * m1;
        let d2 = (12.0 * s - 6.0) * y0
            + (6.0 * s - 4.0) * m0
            + (-12.0 * s + 6.0) * y1
            + (6.0 * s - 2.0) * m1;
        (value, d1 / h, d2 / (h * h))
    }
}

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl SigmoidSpec {
    /// Evaluates `S(x)` without checking the argument. Hot loops use this.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match self {
            SigmoidSpec::Logistic => logistic(x),
            SigmoidSpec::Tabulated(t) => t.eval_all(x).0,
        }
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            SigmoidSpec::Logistic => {
                let s = logistic(x);
                s * (1.0 - s)
            }
            SigmoidSpec::Tabulated(t) => t.eval_all(x).1,
        }
    }

    #[inline]
    pub fn second_derivative(&self, x: f64) -> f64 {
        match self {
            SigmoidSpec::Logistic => {
                let s = logistic(x);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
            SigmoidSpec::Tabulated(t) => t.eval_all(x).2,
        }
    }

    /// `S(x)`, rejecting non-finite arguments.
    pub fn eval(&self, x: f64) -> Result<f64> {
        check_finite(x)?;
        Ok(self.value(x))
    }

    /// `x * S(x)`, rejecting non-finite arguments.
    pub fn x_eval(&self, x: f64) -> Result<f64> {
        check_finite(x)?;
        Ok(x * self.value(x))
    }

    /// Checks the sigmoid shape requirements and measures the derivative
    /// bounds on a dense grid.
    pub fn validate(&self) -> Result<SigmoidBounds> {
        let (lo, hi) = match self {
            SigmoidSpec::Logistic => (-BOUND_GRID_HALF_WIDTH, BOUND_GRID_HALF_WIDTH),
            SigmoidSpec::Tabulated(t) => t.domain(),
        };
        let step = (hi - lo) / (BOUND_GRID_POINTS - 1) as f64;
        // Open interval: a tabulated curve is flat at its end knots. Far in the
        // tails S rounds to 0 or 1 in double precision, so strict positivity
        // of S' is only demanded where S is resolvable.
        let mut previous = f64::NEG_INFINITY;
        for k in 1..BOUND_GRID_POINTS - 1 {
            let x = lo + k as f64 * step;
            let s = self.value(x);
            if !(0.0..=1.0).contains(&s) || s < previous {
                return Err(Error::invalid(
                    "sigmoid",
                    format!("S({x}) = {s} breaks monotonicity or leaves [0, 1]"),
                ));
            }
            previous = s;
            let d = self.derivative(x);
            if s > 1e-12 && s < 1.0 - 1e-12 && (d.is_nan() || d <= 0.0) {
                return Err(Error::invalid("sigmoid", format!("S'({x}) is not positive")));
            }
        }
        Ok(SigmoidBounds::measure(self))
    }
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("sigmoid argument {x} is not finite")))
    }
}

/// Derivative bounds of a sigmoid measured on `[-50, 50]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmoidBounds {
    /// `sup |x S'(x)|`
    pub c_s: f64,
    /// `sup |x S''(x)|`
    pub x_second: f64,
    /// `sup |d/dx (x S(x))| = sup |x S'(x) + S(x)|`, the Lipschitz constant of `x S(x)`.
    pub lipschitz_xs: f64,
}

impl SigmoidBounds {
    fn measure(spec: &SigmoidSpec) -> Self {
        let step = 2.0 * BOUND_GRID_HALF_WIDTH / (BOUND_GRID_POINTS - 1) as f64;
        let mut b = SigmoidBounds {
            c_s: 0.0,
            x_second: 0.0,
            lipschitz_xs: 0.0,
        };
        for k in 0..BOUND_GRID_POINTS {
            let x = -BOUND_GRID_HALF_WIDTH + k as f64 * step;
            let d1 = spec.derivative(x);
            b.c_s = b.c_s.max((x * d1).abs());
            b.x_second = b.x_second.max((x * spec.second_derivative(x)).abs());
            b.lipschitz_xs = b.lipschitz_xs.max((x * d1 + spec.value(x)).abs());
        }
        b
    }
}
