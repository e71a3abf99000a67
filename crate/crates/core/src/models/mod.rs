//! Task models: how raw data reduce to a sum statistic, what the statistic's
//! support is, and the large-sample normal posterior built from it.

pub mod bounded_mean;
pub mod county;
pub mod linreg;

use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::rng::RngHandle;
use crate::sampling::sample_gaussian;

pub use bounded_mean::BoundedMeanModel;
pub use county::{CountyLinearModel, CountyLogisticModel, CountyPublic, CountyRecord, CountyTable};
pub use linreg::{LinearRegressionModel, SimpleOls};

/// Confidential statistic on the sum scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStatistic {
    pub values: Vec<f64>,
    pub n: u64,
    pub task_id: String,
}

impl SummaryStatistic {
    pub fn new(task_id: impl Into<String>, n: u64, values: Vec<f64>) -> Self {
        Self {
            values,
            n,
            task_id: task_id.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCovariance {
    pub theta_hat: Vec<f64>,
    pub cov_hat: DenseMatrix,
    pub d: usize,
}

impl EstimateWithCovariance {
    pub fn new(theta_hat: Vec<f64>, cov_hat: DenseMatrix) -> Result<Self> {
        let d = theta_hat.len();
        if cov_hat.rows() != d || cov_hat.cols() != d {
            return Err(Error::Dimension {
                expected: d,
                got: cov_hat.rows(),
            });
        }
        Ok(Self { theta_hat, cov_hat, d })
    }

    pub fn standard_errors(&self) -> Vec<f64> {
        self.cov_hat.diag().iter().map(|v| v.max(0.0).sqrt()).collect()
    }
}

/// Confidential microdata for one of the supported tasks.
#[derive(Clone, Debug, PartialEq)]
pub enum RawData {
    /// Observations in `[0, 1]`.
    Scalars(Vec<f64>),
    /// `(x, y)` pairs in `[0, 1]^2`.
    Pairs(Vec<(f64, f64)>),
    Counties(CountyTable),
}

pub trait TaskModel: Send + Sync {
    fn task_id(&self) -> &str;

    /// Statistic dimension.
    fn k(&self) -> usize;

    /// Parameter dimension.
    fn d(&self) -> usize;

    fn param_names(&self) -> Vec<String>;

    fn statistic(&self, raw: &RawData) -> Result<SummaryStatistic>;

    fn constraints(&self, n: u64) -> Result<ConstraintSet>;

    /// Efficient estimate and its large-sample covariance. Uses only the
    /// summary statistic.
    fn estimate(&self, t: &SummaryStatistic) -> Result<EstimateWithCovariance>;

    /// One draw from the normal approximation to the non-private posterior.
    fn sample_posterior(&self, rng: &mut RngHandle, t: &SummaryStatistic) -> Result<Vec<f64>> {
        let est = self.estimate(t)?;
        sample_gaussian(rng, &est.theta_hat, &est.cov_hat)
    }
}

pub(crate) fn check_task(model: &dyn TaskModel, t: &SummaryStatistic) -> Result<()> {
    if t.task_id != model.task_id() {
        return Err(Error::param(format!(
            "statistic is for task '{}', model is '{}'",
            t.task_id,
            model.task_id()
        )));
    }
    crate::error::check_dim(model.k(), t.values.len())
}

/// Task ids understood by [`model_for_task`].
pub const TASK_IDS: [&str; 4] = [
    bounded_mean::TASK_ID,
    linreg::TASK_ID,
    county::LINEAR_TASK_ID,
    county::LOGISTIC_TASK_ID,
];

/// Build the model for a task id. County tasks need the public part of the
/// county table.
pub fn model_for_task(
    task_id: &str,
    public: Option<CountyPublic>,
    support: crate::constraints::CountSupport,
) -> Result<Box<dyn TaskModel>> {
    let need_public = || public.clone().ok_or_else(|| Error::param(format!("task '{task_id}' needs public county data")));
    Ok(match task_id {
        bounded_mean::TASK_ID => Box::new(BoundedMeanModel),
        linreg::TASK_ID => Box::new(LinearRegressionModel),
        county::LINEAR_TASK_ID => Box::new(CountyLinearModel::new(need_public()?, support)?),
        county::LOGISTIC_TASK_ID => Box::new(CountyLogisticModel::new(need_public()?, support)?),
        other => return Err(Error::param(format!("unknown task '{other}'"))),
    })
}
