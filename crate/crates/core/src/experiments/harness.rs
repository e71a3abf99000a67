//! Replicated simulation runs.

use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{da_mcmc, wang_known_variance_interval, wang_plugin_interval};
use crate::error::{Error, Result};
use crate::experiments::config::{Design, ExperimentConfig, Method};
use crate::experiments::datagen::{beta_moments, generate_bounded_mean_data, generate_county_table, generate_linreg_data};
use crate::experiments::metrics::{MethodOutcome, MetricsRow, MetricsTable, ReplicateOutcome};
use crate::mechanisms::{release, NoiseFamily, PrivacyBudget, PrivacyRegime, PrivateRelease};
use crate::models::{
    model_for_task, CountyLinearModel, CountyLogisticModel, EstimateWithCovariance, RawData, SummaryStatistic, TaskModel,
};
use crate::pumba::{pumba_draws_with, pumba_meancov_with, CredibleInterval};
use crate::rng::RngHandle;
use crate::stats::{effective_sample_size, norm_quantile};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "PUMBA_THREADS";

/// One design cell (a sample size, or the county table) with the outcome of
/// every method on every replicate.
#[derive(Clone, Debug)]
pub struct Cell {
    pub n: u64,
    pub param_names: Vec<String>,
    pub truth: Vec<f64>,
    /// `outcomes[b][m]` is method `m` on replicate `b`.
    pub outcomes: Vec<Vec<ReplicateOutcome>>,
}

#[derive(Clone, Debug)]
pub struct ExperimentRun {
    pub methods: Vec<Method>,
    pub epsilon: f64,
    pub cells: Vec<Cell>,
}

/// Sample sizes of the design cells. County designs have one cell whose
/// size is the number of counties.
pub fn cell_sizes(cfg: &ExperimentConfig) -> Vec<u64> {
    if cfg.design.is_county() {
        vec![cfg.county.counties as u64]
    } else {
        cfg.data.n.clone()
    }
}

/// Total privacy budget of the configured release.
pub fn total_epsilon(cfg: &ExperimentConfig) -> f64 {
    cfg.privacy.epsilon.iter().sum()
}

/// Noise and budget for the configured design.
pub fn mechanism_for(cfg: &ExperimentConfig, k: usize) -> Result<(NoiseFamily, PrivacyBudget)> {
    let eps = &cfg.privacy.epsilon;
    match cfg.design {
        Design::BoundedMean => Ok((
            NoiseFamily::laplace(eps.iter().map(|e| 1.0 / e).collect())?,
            PrivacyBudget::new(eps.iter().sum(), PrivacyRegime::PureDp, vec![1.0; eps.len()])?,
        )),
        Design::LinregSsp => {
            let sd = (k as f64).sqrt() / eps[0];
            Ok((NoiseFamily::gaussian(vec![sd; k])?, PrivacyBudget::new(eps[0], PrivacyRegime::GaussianDp, vec![1.0; k])?))
        }
        Design::CountyLinear | Design::CountyLogistic => {
            let delta = cfg.county.sensitivity;
            Ok((
                NoiseFamily::gaussian(vec![delta / eps[0]; k])?,
                PrivacyBudget::new(eps[0], PrivacyRegime::GaussianDp, vec![delta])?,
            ))
        }
    }
}

/// Parameter names and true values for a cell.
pub fn truth_for(cfg: &ExperimentConfig) -> Result<(Vec<String>, Vec<f64>)> {
    Ok(match cfg.design {
        Design::BoundedMean => (vec!["mu".into()], vec![beta_moments(cfg.data.beta_a, cfg.data.beta_b).0]),
        Design::LinregSsp => (vec!["beta0".into(), "beta1".into()], vec![cfg.data.beta0, cfg.data.beta1]),
        Design::CountyLinear | Design::CountyLogistic => (
            crate::models::county::COUNTY_PARAM_NAMES.iter().map(|s| s.to_string()).collect(),
            cfg.county.true_coefficients(cfg.design)?,
        ),
    })
}

/// Coordinate whose effective sample size is reported for draw-based
/// methods: the slope where there is one.
fn monitored_coordinate(d: usize) -> usize {
    d.min(2) - 1
}

fn setup(cfg: &ExperimentConfig, n: u64, rng: &mut RngHandle) -> Result<(Box<dyn TaskModel>, SummaryStatistic)> {
    let (model, raw): (Box<dyn TaskModel>, RawData) = match cfg.design {
        Design::BoundedMean => (
            model_for_task(cfg.design.task_id(), None, cfg.county.support)?,
            RawData::Scalars(generate_bounded_mean_data(rng, n as usize, cfg.data.beta_a, cfg.data.beta_b)?),
        ),
        Design::LinregSsp => (
            model_for_task(cfg.design.task_id(), None, cfg.county.support)?,
            RawData::Pairs(generate_linreg_data(rng, n as usize, cfg.data.beta0, cfg.data.beta1)?),
        ),
        Design::CountyLinear => {
            let table = generate_county_table(rng, &cfg.county, cfg.design)?;
            (Box::new(CountyLinearModel::new(table.public(), cfg.county.support)?), RawData::Counties(table))
        }
        Design::CountyLogistic => {
            let table = generate_county_table(rng, &cfg.county, cfg.design)?;
            (Box::new(CountyLogisticModel::new(table.public(), cfg.county.support)?), RawData::Counties(table))
        }
    };
    let t = model.statistic(&raw)?;
    Ok((model, t))
}

fn normal_intervals(est: &EstimateWithCovariance, level: f64) -> Vec<CredibleInterval> {
    let z = norm_quantile(0.5 + level / 2.0);
    est.theta_hat
        .iter()
        .zip(est.standard_errors())
        .map(|(b, se)| CredibleInterval {
            lo: b - z * se,
            hi: b + z * se,
            level,
        })
        .collect()
}

fn run_method(
    cfg: &ExperimentConfig,
    method: Method,
    rng: &mut RngHandle,
    model: &dyn TaskModel,
    t: &SummaryStatistic,
    rel: &PrivateRelease,
) -> Result<MethodOutcome> {
    let level = cfg.level;
    let start = Instant::now();
    let mut ess = None;
    let mut acceptance = None;
    let (estimate, intervals) = match method {
        Method::WangOracle | Method::WangPlugin => {
            let iv = if method == Method::WangOracle {
                wang_known_variance_interval(rel, beta_moments(cfg.data.beta_a, cfg.data.beta_b).1, level)?
            } else {
                wang_plugin_interval(rel, level)?
            };
            (vec![rel.s_dp[0] / rel.n as f64], vec![iv])
        }
        Method::Naive => {
            let noisy = SummaryStatistic::new(model.task_id(), rel.n, rel.s_dp.clone());
            let est = model.estimate(&noisy)?;
            let iv = normal_intervals(&est, level);
            (est.theta_hat, iv)
        }
        Method::NonDp => {
            let est = model.estimate(t)?;
            let iv = normal_intervals(&est, level);
            (est.theta_hat, iv)
        }
        Method::DaMcmc => {
            let out = da_mcmc(rng, rel, &cfg.da_mcmc)?;
            ess = Some(out.ess_beta1);
            acceptance = Some(out.swap_acceptance);
            (out.posterior_mean().to_vec(), out.intervals(level))
        }
        Method::PumbaDraws => {
            let s = pumba_draws_with(rng, rel, model, cfg.draws, level, &cfg.imputation)?;
            let j = monitored_coordinate(s.mean.len());
            let col: Vec<f64> = s.draws.as_ref().map(|d| d.iter().map(|x| x[j]).collect()).unwrap_or_default();
            ess = Some(effective_sample_size(&col));
            acceptance = Some(s.imputation.acceptance_rate);
            (s.mean, s.intervals)
        }
        Method::PumbaMeancov => {
            let s = pumba_meancov_with(rng, rel, model, cfg.draws, level, &cfg.imputation)?;
            acceptance = Some(s.imputation.acceptance_rate);
            (s.mean, s.intervals)
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    if estimate.iter().chain(intervals.iter().flat_map(|i| [&i.lo, &i.hi])).any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite estimate or interval".into()));
    }
    Ok(MethodOutcome {
        estimate,
        intervals,
        seconds,
        ess,
        acceptance,
    })
}

/// Replicate `b` of cell `cell`. Every replicate draws from its own
/// generator stream, so the result does not depend on scheduling. Failures
/// are recorded per method.
pub fn run_replicate(cfg: &ExperimentConfig, cell: usize, n: u64, b: usize) -> Vec<ReplicateOutcome> {
    let base = RngHandle::new(cfg.seed, b as u64).derive(cell as u64);
    let prepared = (|| {
        let (model, t) = setup(cfg, n, &mut base.derive_named("data"))?;
        let (noise, budget) = mechanism_for(cfg, model.k())?;
        let rel = release(&mut base.derive_named("mechanism"), &t, &noise, &budget)?;
        Ok::<_, Error>((model, t, rel))
    })();
    let (model, t, rel) = match prepared {
        Ok(p) => p,
        Err(e) => return cfg.methods.iter().map(|_| Err(format!("setup: {e}"))).collect(),
    };
    cfg.methods
        .iter()
        .map(|&m| {
            let mut rng = base.derive_named(m.name());
            run_method(cfg, m, &mut rng, model.as_ref(), &t, &rel).map_err(|e| e.to_string())
        })
        .collect()
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let k: usize = v
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        builder = builder.num_threads(k);
    }
    builder.build().map_err(|e| Error::Config(e.to_string()))
}

/// Run every replicate of every cell, keeping the per-replicate outcomes.
pub fn run_replicates(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    cfg.validate()?;
    let (param_names, truth) = truth_for(cfg)?;
    let pool = thread_pool()?;
    let cells = cell_sizes(cfg)
        .into_iter()
        .enumerate()
        .map(|(ci, n)| {
            log::info!("{:?}: n = {n}, {} replicates", cfg.design, cfg.replicates);
            let outcomes = pool.install(|| (0..cfg.replicates).into_par_iter().map(|b| run_replicate(cfg, ci, n, b)).collect());
            Cell {
                n,
                param_names: param_names.clone(),
                truth: truth.clone(),
                outcomes,
            }
        })
        .collect();
    Ok(ExperimentRun {
        methods: cfg.methods.clone(),
        epsilon: total_epsilon(cfg),
        cells,
    })
}

/// Aggregate per-replicate outcomes into one row per method, cell and
/// coordinate, in replicate-index order.
pub fn summarize(run: &ExperimentRun) -> MetricsTable {
    let mut rows = Vec::new();
    for (mi, m) in run.methods.iter().enumerate() {
        for cell in &run.cells {
            let outs: Vec<&ReplicateOutcome> = cell.outcomes.iter().map(|r| &r[mi]).collect();
            for (j, (name, &truth)) in cell.param_names.iter().zip(&cell.truth).enumerate() {
                rows.push(MetricsRow::from_outcomes(m.name(), cell.n, run.epsilon, name, j, truth, &outs));
            }
        }
    }
    MetricsTable { rows }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsTable> {
    Ok(summarize(&run_replicates(cfg)?))
}
