//! Mean of observations bounded in `[0, 1]`, from their first two sums.

use crate::constraints::{bounded_moments_constraints, ConstraintSet};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::models::{check_task, EstimateWithCovariance, RawData, SummaryStatistic, TaskModel};

pub const TASK_ID: &str = "bounded_mean";

/// Statistic `(sum t_i, sum t_i^2)`; parameter the mean, with the sample
/// variance as a plug-in nuisance.
#[derive(Clone, Copy, Debug, Default)]
pub struct BoundedMeanModel;

impl BoundedMeanModel {
    /// Sample variance implied by the sums, clamped at zero.
    pub fn sample_variance(n: f64, s1: f64, s2: f64) -> f64 {
        ((s2 - s1 * s1 / n) / (n - 1.0)).max(0.0)
    }
}

impl TaskModel for BoundedMeanModel {
    fn task_id(&self) -> &str {
        TASK_ID
    }

    fn k(&self) -> usize {
        2
    }

    fn d(&self) -> usize {
        1
    }

    fn param_names(&self) -> Vec<String> {
        vec!["mu".into()]
    }

    fn statistic(&self, raw: &RawData) -> Result<SummaryStatistic> {
        let RawData::Scalars(xs) = raw else {
            return Err(Error::param("bounded mean task expects scalar observations"));
        };
        if xs.is_empty() {
            return Err(Error::param("no observations"));
        }
        if let Some(x) = xs.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::param(format!("observation {x} outside [0, 1]")));
        }
        let s1 = xs.iter().sum();
        let s2 = xs.iter().map(|x| x * x).sum();
        Ok(SummaryStatistic::new(TASK_ID, xs.len() as u64, vec![s1, s2]))
    }

    fn constraints(&self, n: u64) -> Result<ConstraintSet> {
        bounded_moments_constraints(n)
    }

    fn estimate(&self, t: &SummaryStatistic) -> Result<EstimateWithCovariance> {
        check_task(self, t)?;
        if t.n < 2 {
            return Err(Error::Estimator("need at least two observations".into()));
        }
        let n = t.n as f64;
        let (s1, s2) = (t.values[0], t.values[1]);
        let var = Self::sample_variance(n, s1, s2);
        EstimateWithCovariance::new(vec![s1 / n], DenseMatrix::diagonal(&[var / n]))
    }
}
