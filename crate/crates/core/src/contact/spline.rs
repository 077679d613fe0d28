//! Piecewise cubic splines in Horner form: on segment `k`,
//! `f(u) = ((a·Δ + b)·Δ + c)·Δ + d` with `Δ = u − u_k`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("a spline needs at least 2 control points, got {0}")]
    TooFewPoints(usize),
    #[error("breakpoints must be strictly ascending (index {0})")]
    NotAscending(usize),
    #[error("{0} abscissae but {1} ordinates")]
    LengthMismatch(usize, usize),
}

/// Value and first two derivatives at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplineEval {
    pub f: f64,
    pub df: f64,
    pub ddf: f64,
    /// The argument was outside the domain and has been clamped.
    pub clamped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CubicSpline {
    breaks: Vec<f64>,
    /// `[a, b, c, d]` per segment.
    coefs: Vec<[f64; 4]>,
}

impl CubicSpline {
    /// Natural cubic spline (zero second derivative at both ends) through
    /// the control points.
    pub fn natural(u: &[f64], y: &[f64]) -> Result<Self, SplineError> {
        if u.len() != y.len() {
            return Err(SplineError::LengthMismatch(u.len(), y.len()));
        }
        let n = u.len();
        if n < 2 {
            return Err(SplineError::TooFewPoints(n));
        }
        for i in 1..n {
            if u[i] <= u[i - 1] {
                return Err(SplineError::NotAscending(i));
            }
        }
        let h: Vec<f64> = (0..n - 1).map(|i| u[i + 1] - u[i]).collect();
        // second derivatives at the knots, Thomas algorithm on the interior
        let mut m2 = vec![0.0; n];
        if n > 2 {
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                upper[i] = h[i + 1];
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h[i + 1] - (y[i + 1] - y[i]) / h[i]);
            }
            for i in 1..k {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m2[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m2[i + 1] = (rhs[i] - upper[i] * m2[i + 2]) / diag[i];
            }
        }
        let coefs = (0..n - 1)
            .map(|i| {
                let hi = h[i];
                [
                    (m2[i + 1] - m2[i]) / (6.0 * hi),
                    m2[i] / 2.0,
                    (y[i + 1] - y[i]) / hi - hi * (2.0 * m2[i] + m2[i + 1]) / 6.0,
                    y[i],
                ]
            })
            .collect();
        Ok(Self {
            breaks: u.to_vec(),
            coefs,
        })
    }

    /// Spline from explicit segments; `breaks` has one more entry than
    /// `coefs`.
    pub fn from_segments(breaks: Vec<f64>, coefs: Vec<[f64; 4]>) -> Result<Self, SplineError> {
        if breaks.len() < 2 {
            return Err(SplineError::TooFewPoints(breaks.len()));
        }
        if breaks.len() != coefs.len() + 1 {
            return Err(SplineError::LengthMismatch(breaks.len(), coefs.len()));
        }
        for i in 1..breaks.len() {
            if breaks[i] <= breaks[i - 1] {
                return Err(SplineError::NotAscending(i));
            }
        }
        Ok(Self { breaks, coefs })
    }

    /// Straight line `f(u) = f0 + slope·(u − u0)` on `[u0, u1]`.
    pub fn linear(u0: f64, u1: f64, f0: f64, slope: f64) -> Self {
        Self {
            breaks: vec![u0, u1],
            coefs: vec![[0.0, 0.0, slope, f0]],
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.breaks[0], *self.breaks.last().unwrap())
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn segment_count(&self) -> usize {
        self.coefs.len()
    }

    /// Active segment index for `u` and whether `u` lies outside the domain.
    pub fn segment(&self, u: f64) -> (usize, bool) {
        let (lo, hi) = self.domain();
        if u < lo || u.is_nan() {
            return (0, true);
        }
        if u > hi {
            return (self.coefs.len() - 1, true);
        }
        let k = self.breaks.partition_point(|&b| b <= u);
        (k.saturating_sub(1).min(self.coefs.len() - 1), false)
    }

    /// Breakpoint and `[a, b, c, d]` of segment `k`.
    pub fn coefficients(&self, k: usize) -> (f64, [f64; 4]) {
        (self.breaks[k], self.coefs[k])
    }

    pub fn eval(&self, u: f64) -> SplineEval {
        let (lo, hi) = self.domain();
        let (k, clamped) = self.segment(u);
        let u = if clamped { u.clamp(lo, hi) } else { u };
        let u = if u.is_nan() { lo } else { u };
        let [a, b, c, d] = self.coefs[k];
        let x = u - self.breaks[k];
        SplineEval {
            f: ((a * x + b) * x + c) * x + d,
            df: (3.0 * a * x + 2.0 * b) * x + c,
            ddf: 6.0 * a * x + 2.0 * b,
            clamped,
        }
    }
}
