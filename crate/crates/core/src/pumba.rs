//! Posterior approximation for privatized statistics.
//!
//! Both estimators first impute `R` confidential statistics from the release.
//! [`pumba_draws`] then draws one parameter per imputation from the normal
//! approximation to the non-private posterior and reports empirical
//! quantile intervals. [`pumba_meancov`] instead combines the per-imputation
//! estimates and covariances through the law of total covariance and
//! reports normal intervals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imputation::{impute, ImputationOptions, ImputationReport};
use crate::linalg::DenseMatrix;
use crate::mechanisms::PrivateRelease;
use crate::models::{SummaryStatistic, TaskModel};
use crate::rng::RngHandle;
use crate::sampling::{covariance_factor, sample_gaussian_factored};
use crate::stats::{norm_quantile, quantile_sorted};

pub const DEFAULT_DRAWS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosteriorMode {
    Draws,
    MeanCov,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CredibleInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

impl CredibleInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mode: PosteriorMode,
    pub param_names: Vec<String>,
    /// Parameter draws, one row per imputation (draws mode only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub draws: Option<Vec<Vec<f64>>>,
    pub mean: Vec<f64>,
    pub cov: DenseMatrix,
    pub intervals: Vec<CredibleInterval>,
    /// Monte Carlo standard error of each component of `mean`.
    pub mc_standard_errors: Vec<f64>,
    pub imputation: ImputationReport,
}

/// Per-coordinate scoring of an interval against an optional truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub parameter: String,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
    pub covered: Option<bool>,
}

fn check_inputs(release: &PrivateRelease, model: &dyn TaskModel, r_draws: usize, level: f64) -> Result<()> {
    if release.task_id != model.task_id() {
        return Err(Error::param(format!(
            "release is for task '{}', model is '{}'",
            release.task_id,
            model.task_id()
        )));
    }
    if r_draws < 2 {
        return Err(Error::param("need at least two imputations"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::param(format!("level must lie in (0, 1), got {level}")));
    }
    release.validate()
}

fn imputed_statistics(
    rng: &mut RngHandle,
    release: &PrivateRelease,
    model: &dyn TaskModel,
    r_draws: usize,
    options: &ImputationOptions,
) -> Result<(ImputationReport, Vec<SummaryStatistic>)> {
    let cs = model.constraints(release.n)?;
    let report = impute(rng, release, &cs, r_draws, options)?;
    let stats = report
        .draws
        .iter()
        .map(|t| SummaryStatistic::new(model.task_id(), release.n, t.clone()))
        .collect();
    Ok((report, stats))
}

/// Empirical mean and covariance (divisor `R - 1`) of row vectors.
pub fn sample_moments(rows: &[Vec<f64>]) -> (Vec<f64>, DenseMatrix) {
    let r = rows.len();
    let d = rows.first().map_or(0, |x| x.len());
    let mut mean = vec![0.0; d];
    for x in rows {
        for j in 0..d {
            mean[j] += x[j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= r as f64);
    let mut cov = DenseMatrix::zeros(d, d);
    if r > 1 {
        for x in rows {
            for a in 0..d {
                let da = x[a] - mean[a];
                for b in 0..=a {
                    cov[(a, b)] += da * (x[b] - mean[b]);
                }
            }
        }
        for a in 0..d {
            for b in 0..=a {
                let v = cov[(a, b)] / (r - 1) as f64;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
    }
    (mean, cov)
}

/// Impute, then draw one parameter per imputed statistic; intervals are
/// equal-tailed empirical quantiles.
pub fn pumba_draws(
    rng: &mut RngHandle,
    release: &PrivateRelease,
    model: &dyn TaskModel,
    r_draws: usize,
    level: f64,
) -> Result<PosteriorSummary> {
    pumba_draws_with(rng, release, model, r_draws, level, &ImputationOptions::default())
}

pub fn pumba_draws_with(
    rng: &mut RngHandle,
    release: &PrivateRelease,
    model: &dyn TaskModel,
    r_draws: usize,
    level: f64,
    options: &ImputationOptions,
) -> Result<PosteriorSummary> {
    check_inputs(release, model, r_draws, level)?;
    let (report, stats) = imputed_statistics(rng, release, model, r_draws, options)?;
    let draws = stats
        .iter()
        .map(|t| {
            let est = model.estimate(t)?;
            let f = covariance_factor(&est.cov_hat)?;
            Ok(sample_gaussian_factored(rng, &est.theta_hat, &f))
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let (mean, cov) = sample_moments(&draws);
    let d = mean.len();
    let alpha = 1.0 - level;
    let mut intervals = Vec::with_capacity(d);
    let mut mc_se = Vec::with_capacity(d);
    for j in 0..d {
        let mut col: Vec<f64> = draws.iter().map(|x| x[j]).collect();
        col.sort_by(f64::total_cmp);
        intervals.push(CredibleInterval {
            lo: quantile_sorted(&col, alpha / 2.0),
            hi: quantile_sorted(&col, 1.0 - alpha / 2.0),
            level,
        });
        mc_se.push((cov[(j, j)] / r_draws as f64).sqrt());
    }
    Ok(PosteriorSummary {
        mode: PosteriorMode::Draws,
        param_names: model.param_names(),
        draws: Some(draws),
        mean,
        cov,
        intervals,
        mc_standard_errors: mc_se,
        imputation: report,
    })
}

/// Impute, then combine per-imputation estimates: the covariance is the
/// average within-imputation covariance plus the between-imputation
/// covariance of the estimates; intervals are normal.
pub fn pumba_meancov(
    rng: &mut RngHandle,
    release: &PrivateRelease,
    model: &dyn TaskModel,
    r_draws: usize,
    level: f64,
) -> Result<PosteriorSummary> {
    pumba_meancov_with(rng, release, model, r_draws, level, &ImputationOptions::default())
}

pub fn pumba_meancov_with(
    rng: &mut RngHandle,
    release: &PrivateRelease,
    model: &dyn TaskModel,
    r_draws: usize,
    level: f64,
    options: &ImputationOptions,
) -> Result<PosteriorSummary> {
    check_inputs(release, model, r_draws, level)?;
    let (report, stats) = imputed_statistics(rng, release, model, r_draws, options)?;
    let mut estimates = Vec::with_capacity(r_draws);
    let mut covs = Vec::with_capacity(r_draws);
    for t in &stats {
        let e = model.estimate(t)?;
        estimates.push(e.theta_hat);
        covs.push(e.cov_hat);
    }
    let (mean, cov) = combine_total_covariance(&estimates, &covs)?;
    let z = norm_quantile(0.5 + level / 2.0);
    let (_, between) = sample_moments(&estimates);
    let d = mean.len();
    let intervals = (0..d)
        .map(|j| {
            let half = z * cov[(j, j)].max(0.0).sqrt();
            CredibleInterval {
                lo: mean[j] - half,
                hi: mean[j] + half,
                level,
            }
        })
        .collect();
    let mc_se = (0..d).map(|j| (between[(j, j)] / r_draws as f64).sqrt()).collect();
    Ok(PosteriorSummary {
        mode: PosteriorMode::MeanCov,
        param_names: model.param_names(),
        draws: None,
        mean,
        cov,
        intervals,
        mc_standard_errors: mc_se,
        imputation: report,
    })
}

/// Mean of the estimates and `mean(covs) + cov(estimates)`, the latter with
/// divisor `R - 1`.
pub fn combine_total_covariance(estimates: &[Vec<f64>], covs: &[DenseMatrix]) -> Result<(Vec<f64>, DenseMatrix)> {
    let r = estimates.len();
    if r < 2 || covs.len() != r {
        return Err(Error::param("need at least two estimates with matching covariances"));
    }
    let (mean, between) = sample_moments(estimates);
    let d = mean.len();
    let mut within = DenseMatrix::zeros(d, d);
    for c in covs {
        within = within.add(c)?;
    }
    let within = within.scaled(1.0 / r as f64);
    Ok((mean, within.add(&between)?))
}

/// Score each coordinate's interval, optionally against a true value.
pub fn interval_report(summary: &PosteriorSummary, truth: Option<&[f64]>) -> Result<Vec<IntervalRecord>> {
    if let Some(t) = truth {
        crate::error::check_dim(summary.intervals.len(), t.len())?;
    }
    Ok(summary
        .intervals
        .iter()
        .enumerate()
        .map(|(j, iv)| IntervalRecord {
            parameter: summary.param_names.get(j).cloned().unwrap_or_else(|| format!("theta{j}")),
            estimate: summary.mean[j],
            lo: iv.lo,
            hi: iv.hi,
            width: iv.width(),
            covered: truth.map(|t| iv.contains(t[j])),
        })
        .collect())
}
