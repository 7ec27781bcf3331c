//! Natural cubic spline interpolation.
//!
//! Second-derivative formulation with natural boundary conditions (zero
//! curvature at both ends); the tridiagonal system is solved with the Thomas
//! algorithm. Evaluation outside the knot hull is refused by the callers
//! that build on this.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SplineError {
    #[error("natural cubic spline needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("knot abscissae must be strictly increasing (x[{index}] = {value} repeats or decreases)")]
    NonMonotonic { index: usize, value: f64 },
    #[error("evaluation point {x} outside the knot hull [{lo}, {hi}]")]
    OutOfHull { x: f64, lo: f64, hi: f64 },
}

/// Natural cubic spline through `(x_i, y_i)` knots.
#[derive(Debug, Clone)]
pub struct NaturalCubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots (zero at both ends).
    second_derivatives: Vec<f64>,
}

impl NaturalCubicSpline {
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<Self, SplineError> {
        assert_eq!(xs.len(), ys.len(), "knot coordinate lengths differ");
        let n = xs.len();
        if n < 4 {
            return Err(SplineError::TooFewPoints(n));
        }
        for i in 1..n {
            if xs[i] <= xs[i - 1] {
                return Err(SplineError::NonMonotonic {
                    index: i,
                    value: xs[i],
                });
            }
        }

        // Interior equations
        //   (h_{i-1}/6)·M_{i-1} + ((h_{i-1}+h_i)/3)·M_i + (h_i/6)·M_{i+1}
        //     = (y_{i+1}-y_i)/h_i − (y_i-y_{i-1})/h_{i-1}
        // with M_0 = M_{n-1} = 0; solved by the Thomas algorithm.
        let m = n - 2;
        let mut sub = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut sup = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for i in 0..m {
            let h_lo = xs[i + 1] - xs[i];
            let h_hi = xs[i + 2] - xs[i + 1];
            sub[i] = h_lo / 6.0;
            diag[i] = (h_lo + h_hi) / 3.0;
            sup[i] = h_hi / 6.0;
            rhs[i] = (ys[i + 2] - ys[i + 1]) / h_hi - (ys[i + 1] - ys[i]) / h_lo;
        }
        for i in 1..m {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut interior = vec![0.0; m];
        interior[m - 1] = rhs[m - 1] / diag[m - 1];
        for i in (0..m - 1).rev() {
            interior[i] = (rhs[i] - sup[i] * interior[i + 1]) / diag[i];
        }

        let mut second_derivatives = vec![0.0; n];
        second_derivatives[1..n - 1].copy_from_slice(&interior);
        Ok(NaturalCubicSpline {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            second_derivatives,
        })
    }

    pub fn hull(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    pub fn evaluate(&self, x: f64) -> Result<f64, SplineError> {
        let (lo, hi) = self.hull();
        if x < lo || x > hi {
            return Err(SplineError::OutOfHull { x, lo, hi });
        }
        // Interval index by binary search; right-closed at the last knot.
        let i = match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(k) => k.min(self.xs.len() - 2),
            Err(k) => k - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        let (m_lo, m_hi) = (self.second_derivatives[i], self.second_derivatives[i + 1]);
        Ok(a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * m_lo + (b * b * b - b) * m_hi) * h * h / 6.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: assemble the full natural-spline linear system and
    /// solve it by dense Gaussian elimination with partial pivoting, then
    /// evaluate with the same piecewise formula.
    fn dense_oracle(xs: &[f64], ys: &[f64], at: f64) -> f64 {
        let n = xs.len();
        let mut a = vec![vec![0.0f64; n]; n];
        let mut b = vec![0.0f64; n];
        a[0][0] = 1.0;
        a[n - 1][n - 1] = 1.0;
        for i in 1..n - 1 {
            let h_lo = xs[i] - xs[i - 1];
            let h_hi = xs[i + 1] - xs[i];
            a[i][i - 1] = h_lo / 6.0;
            a[i][i] = (h_lo + h_hi) / 3.0;
            a[i][i + 1] = h_hi / 6.0;
            b[i] = (ys[i + 1] - ys[i]) / h_hi - (ys[i] - ys[i - 1]) / h_lo;
        }
        for col in 0..n {
            let pivot = (col..n).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs())).unwrap();
            a.swap(col, pivot);
            b.swap(col, pivot);
            for row in col + 1..n {
                let w = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= w * a[col][k];
                }
                b[row] -= w * b[col];
            }
        }
        let mut m = vec![0.0f64; n];
        for row in (0..n).rev() {
            let mut acc = b[row];
            for k in row + 1..n {
                acc -= a[row][k] * m[k];
            }
            m[row] = acc / a[row][row];
        }
        let i = xs.iter().rposition(|&v| v <= at).unwrap().min(n - 2);
        let h = xs[i + 1] - xs[i];
        let alpha = (xs[i + 1] - at) / h;
        let beta = (at - xs[i]) / h;
        alpha * ys[i]
            + beta * ys[i + 1]
            + ((alpha.powi(3) - alpha) * m[i] + (beta.powi(3) - beta) * m[i + 1]) * h * h / 6.0
    }

    #[test]
    fn reproduces_linear_data_exactly() {
        let xs: Vec<f64> = (0..5).map(|i| 1.0 + i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 7.0).collect();
        let s = NaturalCubicSpline::fit(&xs, &ys).unwrap();
        let mut x = 1.0;
        while x <= 5.0 {
            let expect = 3.0 * x - 7.0;
            assert!((s.evaluate(x).unwrap() - expect).abs() <= 1e-12, "at {x}");
            x += 0.031;
        }
    }

    #[test]
    fn interpolates_knots_exactly() {
        let xs = [0.0, 0.7, 1.1, 2.3, 3.0];
        let ys = [1.0, -0.4, 0.9, 2.2, -1.0];
        let s = NaturalCubicSpline::fit(&xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(ys) {
            assert!((s.evaluate(*x).unwrap() - y).abs() <= 1e-13);
        }
    }

    #[test]
    fn matches_dense_oracle_on_sine_samples() {
        let xs: Vec<f64> = (0..6).map(|i| i as f64 * 0.9).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let s = NaturalCubicSpline::fit(&xs, &ys).unwrap();
        for k in 0..5 {
            let mid = 0.5 * (xs[k] + xs[k + 1]);
            let ours = s.evaluate(mid).unwrap();
            let oracle = dense_oracle(&xs, &ys, mid);
            assert!((ours - oracle).abs() < 1e-9, "midpoint {mid}: {ours} vs {oracle}");
        }
    }

    #[test]
    fn rejects_underdetermined_and_non_monotone_input() {
        let err = NaturalCubicSpline::fit(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).unwrap_err();
        assert_eq!(err, SplineError::TooFewPoints(3));
        let err = NaturalCubicSpline::fit(&[0.0, 1.0, 1.0, 2.0], &[0.0; 4]).unwrap_err();
        assert!(matches!(err, SplineError::NonMonotonic { index: 2, .. }));
    }

    #[test]
    fn refuses_extrapolation() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [0.0, 1.0, 4.0, 9.0];
        let s = NaturalCubicSpline::fit(&xs, &ys).unwrap();
        assert!(matches!(s.evaluate(3.0001), Err(SplineError::OutOfHull { .. })));
        assert!(s.evaluate(3.0).is_ok());
    }
}
