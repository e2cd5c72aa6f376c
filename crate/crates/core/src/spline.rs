//! Natural cubic spline on a uniform grid, used for tabulated envelopes and
//! chirps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SplineRepr", into = "SplineRepr")]
pub struct CubicSpline {
    span: f64,
    values: Vec<f64>,
    /// Second derivatives at the knots.
    moments: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SplineRepr {
    span: f64,
    values: Vec<f64>,
}

impl TryFrom<SplineRepr> for CubicSpline {
    type Error = Error;

    fn try_from(r: SplineRepr) -> Result<Self> {
        CubicSpline::new(r.span, r.values)
    }
}

impl From<CubicSpline> for SplineRepr {
    fn from(s: CubicSpline) -> Self {
        SplineRepr { span: s.span, values: s.values }
    }
}

impl CubicSpline {
    /// Spline through `values` sampled uniformly on `[0, span]`.
    pub fn new(span: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::argument("a tabulated profile needs at least 3 samples"));
        }
        if !(span > 0.0) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::argument("tabulated profile must be finite on a positive span"));
        }
        let n = values.len();
        let h = span / (n - 1) as f64;
        // Tridiagonal system for the interior moments (natural end conditions).
        let m = n - 2;
        let mut moments = vec![0.0; n];
        if m > 0 {
            let mut diag = vec![4.0; m];
            let mut rhs: Vec<f64> =
                (1..n - 1).map(|i| 6.0 * (values[i - 1] - 2.0 * values[i] + values[i + 1]) / (h * h)).collect();
            for i in 1..m {
                let w = 1.0 / diag[i - 1];
                diag[i] -= w;
                rhs[i] -= w * rhs[i - 1];
            }
            let mut sol = vec![0.0; m];
            sol[m - 1] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                sol[i] = (rhs[i] - sol[i + 1]) / diag[i];
            }
            moments[1..n - 1].copy_from_slice(&sol);
        }
        Ok(Self { span, values, moments })
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn knot_spacing(&self) -> f64 {
        self.span / (self.values.len() - 1) as f64
    }

    fn locate(&self, x: f64) -> (usize, f64, f64) {
        let h = self.knot_spacing();
        let last = self.values.len() - 2;
        let x = x.clamp(0.0, self.span);
        let i = ((x / h).floor() as usize).min(last);
        let a = (x - i as f64 * h) / h;
        (i, a, h)
    }

    pub fn value(&self, x: f64) -> f64 {
        let (i, a, h) = self.locate(x);
        let b = 1.0 - a;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.moments[i], self.moments[i + 1]);
        b * y0 + a * y1 + h * h / 6.0 * ((b * b * b - b) * m0 + (a * a * a - a) * m1)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let (i, a, h) = self.locate(x);
        let b = 1.0 - a;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.moments[i], self.moments[i + 1]);
        (y1 - y0) / h + h / 6.0 * (-(3.0 * b * b - 1.0) * m0 + (3.0 * a * a - 1.0) * m1)
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let (i, a, _) = self.locate(x);
        (1.0 - a) * self.moments[i] + a * self.moments[i + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_linear_data_exactly() {
        let s = CubicSpline::new(2.0, (0..11).map(|i| 3.0 + 0.2 * i as f64).collect()).unwrap();
        for x in [0.0, 0.13, 0.7, 1.99, 2.0] {
            assert!((s.value(x) - (3.0 + x)).abs() < 1e-13);
            assert!((s.derivative(x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolates_sine_accurately() {
        let n = 201;
        let pi = std::f64::consts::PI;
        let vals = (0..n).map(|i| (pi * i as f64 / (n - 1) as f64).sin()).collect();
        let s = CubicSpline::new(1.0, vals).unwrap();
        for k in 0..50 {
            let x = k as f64 / 49.0;
            assert!((s.value(x) - (pi * x).sin()).abs() < 1e-7);
            assert!((s.derivative(x) - pi * (pi * x).cos()).abs() < 1e-4);
        }
    }

    #[test]
    fn rejects_short_tables() {
        assert!(CubicSpline::new(1.0, vec![0.0, 1.0]).is_err());
    }
}
