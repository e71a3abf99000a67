//! Regression that treats the noisy sums as if they were the true ones.

use crate::error::Result;
use crate::mechanisms::PrivateRelease;
use crate::models::{EstimateWithCovariance, LinearRegressionModel, SummaryStatistic, TaskModel};
use crate::pumba::CredibleInterval;
use crate::stats::norm_quantile;

#[derive(Clone, Debug, PartialEq)]
pub struct NaiveFit {
    pub estimate: EstimateWithCovariance,
    pub intervals: Vec<CredibleInterval>,
}

/// OLS on the noisy sums with the classical covariance and normal
/// intervals. Fails with an estimator error when the noisy `X^T X` is not
/// positive definite.
pub fn naive_regression(release: &PrivateRelease, level: f64) -> Result<NaiveFit> {
    let model = LinearRegressionModel;
    let t = SummaryStatistic::new(model.task_id(), release.n, release.s_dp.clone());
    let estimate = model.estimate(&t)?;
    let z = norm_quantile(0.5 + level / 2.0);
    let intervals = estimate
        .theta_hat
        .iter()
        .zip(estimate.standard_errors())
        .map(|(b, se)| CredibleInterval {
            lo: b - z * se,
            hi: b + z * se,
            level,
        })
        .collect();
    Ok(NaiveFit { estimate, intervals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::mechanisms::{NoiseFamily, PrivacyBudget, PrivacyRegime};

    fn release(s: Vec<f64>) -> PrivateRelease {
        PrivateRelease {
            task_id: "linreg_ssp".into(),
            n: 30,
            s_dp: s,
            noise: NoiseFamily::gaussian(vec![5f64.sqrt(); 5]).unwrap(),
            budget: PrivacyBudget::new(1.0, PrivacyRegime::GaussianDp, vec![1.0; 5]).unwrap(),
        }
    }

    #[test]
    fn same_as_model_estimate() {
        let s = vec![15.2, 10.1, 12.0, 6.0, 7.9];
        let fit = naive_regression(&release(s.clone()), 0.95).unwrap();
        let direct = LinearRegressionModel
            .estimate(&SummaryStatistic::new("linreg_ssp", 30, s))
            .unwrap();
        assert_eq!(fit.estimate, direct);
        assert!(fit.intervals[1].contains(direct.theta_hat[1]));
    }

    #[test]
    fn indefinite_noisy_design_is_invalid() {
        // Sxx far below Sx^2 / n
        let r = naive_regression(&release(vec![15.0, 1.0, 12.0, 6.0, 7.9]), 0.95);
        assert!(matches!(r, Err(Error::Estimator(_))));
    }
}
