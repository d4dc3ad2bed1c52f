//! Uniform B-spline bases for KAN edge functions.
//!
//! A grid with `g` intervals on `[lo, hi]` and degree `d` uses the uniform
//! knot vector `t_i = lo + (i - d) h`, `i = 0..=g + 2d`, with `h = (hi - lo) / g`.
//! The `d` knots on each side of the domain extend the uniform spacing, so
//! there are `g + d` basis functions and they sum to one everywhere on
//! `[lo, hi]`. Inputs outside the domain are clamped to it before evaluation,
//! which makes the spline term constant (and its derivative zero) there.
//!
//! "Degree" is the polynomial degree of each piece: degree 3 is the cubic
//! spline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_DEGREE: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("spline grid needs at least one interval")]
    NoIntervals,
    #[error("invalid spline domain [{lo}, {hi}]")]
    Domain { lo: f64, hi: f64 },
    #[error("spline degree {0} exceeds the supported maximum of 30")]
    DegreeTooHigh(usize),
    #[error("spline input is not finite: {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "GridSpec", try_from = "GridSpec")]
pub struct SplineGrid {
    degree: usize,
    intervals: usize,
    lo: f64,
    hi: f64,
    knots: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridSpec {
    degree: usize,
    intervals: usize,
    lo: f64,
    hi: f64,
}

impl From<SplineGrid> for GridSpec {
    fn from(g: SplineGrid) -> Self {
        GridSpec {
            degree: g.degree,
            intervals: g.intervals,
            lo: g.lo,
            hi: g.hi,
        }
    }
}

impl TryFrom<GridSpec> for SplineGrid {
    type Error = SplineError;
    fn try_from(s: GridSpec) -> Result<Self, SplineError> {
        SplineGrid::new(s.degree, s.intervals, s.lo, s.hi)
    }
}

impl SplineGrid {
    pub fn new(degree: usize, intervals: usize, lo: f64, hi: f64) -> Result<Self, SplineError> {
        if intervals == 0 {
            return Err(SplineError::NoIntervals);
        }
        if degree > MAX_DEGREE {
            return Err(SplineError::DegreeTooHigh(degree));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(SplineError::Domain { lo, hi });
        }
        let h = (hi - lo) / intervals as f64;
        let knots = (0..=intervals + 2 * degree)
            .map(|i| lo + (i as f64 - degree as f64) * h)
            .collect();
        Ok(Self {
            degree,
            intervals,
            lo,
            hi,
            knots,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn num_basis(&self) -> usize {
        self.intervals + self.degree
    }

    fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.intervals as f64
    }

    /// Knot span `k` with `x` in `[t_k, t_{k+1})`, the last span closed on the right.
    fn span(&self, x: f64) -> usize {
        let d = self.degree;
        let last = self.intervals + d - 1;
        let raw = ((x - self.lo) / self.spacing()).floor();
        let mut k = if raw <= 0.0 { d } else { (raw as usize + d).min(last) };
        // Guard against rounding in the division putting x one span off.
        if k > d && x < self.knots[k] {
            k -= 1;
        } else if k < last && x >= self.knots[k + 1] {
            k += 1;
        }
        k
    }

    fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    /// Cox-de Boor triangle for the `deg + 1` nonzero bases at span `k`,
    /// written into `n[..=deg]` (bases `k - deg ..= k`).
    fn triangle(&self, x: f64, k: usize, deg: usize, n: &mut [f64]) {
        let t = &self.knots;
        let mut left = [0.0; MAX_DEGREE + 1];
        let mut right = [0.0; MAX_DEGREE + 1];
        n[0] = 1.0;
        for j in 1..=deg {
            left[j] = x - t[k + 1 - j];
            right[j] = t[k + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let tmp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            n[j] = saved;
        }
    }

    /// Writes all `g + d` basis values at `x` into `out`.
    pub fn basis_into(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.num_basis());
        out.iter_mut().for_each(|v| *v = 0.0);
        let x = self.clamp(x);
        let d = self.degree;
        let k = self.span(x);
        let mut n = [0.0; MAX_DEGREE + 1];
        self.triangle(x, k, d, &mut n);
        out[k - d..=k].copy_from_slice(&n[..=d]);
    }

    /// Basis values and their x-derivatives. Clamped inputs get zero
    /// derivatives.
    pub fn basis_and_derivative_into(&self, x: f64, out: &mut [f64], dout: &mut [f64]) {
        debug_assert_eq!(out.len(), self.num_basis());
        debug_assert_eq!(dout.len(), self.num_basis());
        out.iter_mut().for_each(|v| *v = 0.0);
        dout.iter_mut().for_each(|v| *v = 0.0);
        let inside = x >= self.lo && x <= self.hi;
        let x = self.clamp(x);
        let d = self.degree;
        let k = self.span(x);
        let mut n = [0.0; MAX_DEGREE + 1];
        if d == 0 {
            out[k] = 1.0;
            return;
        }
        // Degree d-1 first; those feed both the derivative and the last step.
        self.triangle(x, k, d - 1, &mut n);
        if inside {
            let t = &self.knots;
            for r in 0..=d {
                let j = k - d + r;
                let mut v = 0.0;
                if r >= 1 {
                    v += n[r - 1] / (t[j + d] - t[j]);
                }
                if r < d {
                    v -= n[r] / (t[j + d + 1] - t[j + 1]);
                }
                dout[j] = d as f64 * v;
            }
        }
        self.triangle(x, k, d, &mut n);
        out[k - d..=k].copy_from_slice(&n[..=d]);
    }

    pub fn basis_eval(&self, x: f64) -> Result<Vec<f64>, SplineError> {
        if !x.is_finite() {
            return Err(SplineError::NonFinite(x));
        }
        let mut out = vec![0.0; self.num_basis()];
        self.basis_into(x, &mut out);
        Ok(out)
    }

    /// Row-major `xs.len() x (g + d)` matrix of basis values.
    pub fn basis_eval_batch(&self, xs: &[f64]) -> Result<Vec<f64>, SplineError> {
        let nb = self.num_basis();
        let mut out = vec![0.0; xs.len() * nb];
        for (row, &x) in out.chunks_mut(nb).zip(xs) {
            if !x.is_finite() {
                return Err(SplineError::NonFinite(x));
            }
            self.basis_into(x, row);
        }
        Ok(out)
    }

    pub fn basis_derivative(&self, x: f64) -> Result<Vec<f64>, SplineError> {
        if !x.is_finite() {
            return Err(SplineError::NonFinite(x));
        }
        let mut b = vec![0.0; self.num_basis()];
        let mut db = vec![0.0; self.num_basis()];
        self.basis_and_derivative_into(x, &mut b, &mut db);
        Ok(db)
    }
}
