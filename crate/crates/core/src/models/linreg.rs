//! Simple linear regression `y = b0 + b1 x + e` from its five moment sums.

use crate::constraints::{regression_constraints, ConstraintSet};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, PIVOT_TOLERANCE};
use crate::models::{check_task, EstimateWithCovariance, RawData, SummaryStatistic, TaskModel};

pub const TASK_ID: &str = "linreg_ssp";

/// Least squares reconstructed from `(Sx, Sxx, Sy, Syy, Sxy)`.
///
/// The design `X^T X = [[n, Sx], [Sx, Sxx]]` is factored with the same
/// pivot rule as [`DenseMatrix::cholesky`], so the constraint check and the
/// estimator agree on which statistics are admissible.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimpleOls {
    pub beta: [f64; 2],
    /// `Syy - beta^T X^T y`, unclamped.
    pub residual_ss: f64,
    /// `(X^T X)^{-1}`, row-major.
    pub xtx_inv: [f64; 4],
}

impl SimpleOls {
    pub fn from_sums(n: f64, t: &[f64]) -> Option<SimpleOls> {
        let (sx, sxx, sy, syy, sxy) = (t[0], t[1], t[2], t[3], t[4]);
        let floor = PIVOT_TOLERANCE * n.abs().max(sxx.abs());
        if !(n > floor) {
            return None;
        }
        let l11 = n.sqrt();
        let l21 = sx / l11;
        let d2 = sxx - l21 * l21;
        if !(d2 > floor) || !d2.is_finite() {
            return None;
        }
        let l22 = d2.sqrt();
        let z1 = sy / l11;
        let z2 = (sxy - l21 * z1) / l22;
        let b1 = z2 / l22;
        let b0 = (z1 - l21 * b1) / l11;
        let det = n * d2;
        Some(SimpleOls {
            beta: [b0, b1],
            residual_ss: syy - b0 * sy - b1 * sxy,
            xtx_inv: [sxx / det, -sx / det, -sx / det, n / det],
        })
    }

    /// Residual variance with the `n - 2` divisor, clamped at zero.
    pub fn sigma2(&self, n: f64) -> f64 {
        (self.residual_ss / (n - 2.0)).max(0.0)
    }
}

/// OLS estimate and classical covariance `sigma^2 (X^T X)^{-1}` from sums.
pub fn ols_estimate(n: u64, t: &[f64]) -> Result<EstimateWithCovariance> {
    if n < 3 {
        return Err(Error::Estimator("regression needs at least three observations".into()));
    }
    let nf = n as f64;
    let ols = SimpleOls::from_sums(nf, t).ok_or_else(|| Error::Estimator("X^T X is not positive definite".into()))?;
    let s2 = ols.sigma2(nf);
    let cov = DenseMatrix::new(2, 2, ols.xtx_inv.iter().map(|v| v * s2).collect())?;
    EstimateWithCovariance::new(ols.beta.to_vec(), cov)
}

/// Regression of `y` on `x` for data in the unit square.
#[derive(Clone, Copy, Debug, Default)]
pub struct LinearRegressionModel;

pub fn regression_sums(pairs: &[(f64, f64)]) -> [f64; 5] {
    let mut t = [0.0; 5];
    for &(x, y) in pairs {
        t[0] += x;
        t[1] += x * x;
        t[2] += y;
        t[3] += y * y;
        t[4] += x * y;
    }
    t
}

impl TaskModel for LinearRegressionModel {
    fn task_id(&self) -> &str {
        TASK_ID
    }

    fn k(&self) -> usize {
        5
    }

    fn d(&self) -> usize {
        2
    }

    fn param_names(&self) -> Vec<String> {
        vec!["beta0".into(), "beta1".into()]
    }

    fn statistic(&self, raw: &RawData) -> Result<SummaryStatistic> {
        let RawData::Pairs(pairs) = raw else {
            return Err(Error::param("regression task expects (x, y) pairs"));
        };
        if let Some(p) = pairs
            .iter()
            .find(|(x, y)| !(0.0..=1.0).contains(x) || !(0.0..=1.0).contains(y))
        {
            return Err(Error::param(format!("pair {p:?} outside the unit square")));
        }
        Ok(SummaryStatistic::new(TASK_ID, pairs.len() as u64, regression_sums(pairs).to_vec()))
    }

    fn constraints(&self, n: u64) -> Result<ConstraintSet> {
        regression_constraints(n)
    }

    fn estimate(&self, t: &SummaryStatistic) -> Result<EstimateWithCovariance> {
        check_task(self, t)?;
        ols_estimate(t.n, &t.values)
    }
}
