//! County-level homeownership regressions.
//!
//! Each county releases five counts: four minority ethnicity counts and the
//! number of homeowners. Populations and the socio-economic covariates are
//! public. Counts are turned into proportions by dividing by population and
//! regressed across counties, either by OLS on the homeownership proportion
//! or by a population-weighted logistic fit.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constraints::{county_table_constraints, ConstraintSet, CountSupport, COUNTY_STAT_DIM};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::models::{check_task, EstimateWithCovariance, RawData, SummaryStatistic, TaskModel};

pub const LINEAR_TASK_ID: &str = "county_linear";
pub const LOGISTIC_TASK_ID: &str = "county_logistic";

/// Regression coefficients, intercept first.
pub const COUNTY_PARAM_NAMES: [&str; 10] = [
    "intercept",
    "black",
    "asian",
    "indigenous",
    "other",
    "unemployed",
    "poverty",
    "no_insurance",
    "housecost",
    "pop_density",
];

pub const COUNTY_PARAM_DIM: usize = 10;

const NEWTON_MAX_ITER: usize = 100;
/// Largest gradient norm (weights normalized to mean one) accepted at a
/// Newton fixed point.
const GRADIENT_TOLERANCE: f64 = 1e-6;

/// One row of the county table. Counts are stored as reals so imputed
/// (non-integral) tables share the type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountyRecord {
    pub county_id: String,
    pub pop: u64,
    pub homeowners: f64,
    pub eth_black: f64,
    pub eth_asian: f64,
    pub eth_indig: f64,
    pub eth_other: f64,
    pub unemployed: f64,
    pub poverty: f64,
    pub no_insurance: f64,
    pub housecost: f64,
    pub pop_density: f64,
}

impl CountyRecord {
    /// The privatized counts in release order.
    pub fn counts(&self) -> [f64; COUNTY_STAT_DIM] {
        [self.eth_black, self.eth_asian, self.eth_indig, self.eth_other, self.homeowners]
    }

    pub fn public(&self) -> PublicCounty {
        PublicCounty {
            county_id: self.county_id.clone(),
            pop: self.pop,
            unemployed: self.unemployed,
            poverty: self.poverty,
            no_insurance: self.no_insurance,
            housecost: self.housecost,
            pop_density: self.pop_density,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CountyTable {
    pub rows: Vec<CountyRecord>,
}

impl CountyTable {
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<CountyRecord>, _>>()?;
        Ok(Self { rows })
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn public(&self) -> CountyPublic {
        CountyPublic {
            rows: self.rows.iter().map(CountyRecord::public).collect(),
        }
    }

    pub fn stacked_counts(&self) -> Vec<f64> {
        self.rows.iter().flat_map(|r| r.counts()).collect()
    }
}

/// Columns of a county row that are not privatized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PublicCounty {
    pub county_id: String,
    pub pop: u64,
    pub unemployed: f64,
    pub poverty: f64,
    pub no_insurance: f64,
    pub housecost: f64,
    pub pop_density: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CountyPublic {
    pub rows: Vec<PublicCounty>,
}

impl CountyPublic {
    /// Reads the public columns; any other columns in the file are ignored.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<PublicCounty>, _>>()?;
        Ok(Self { rows })
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn populations(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.pop).collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Design matrix and response shared by both county models.
struct CountyDesign {
    x: DenseMatrix,
    y: Vec<f64>,
    pops: Vec<f64>,
}

impl CountyDesign {
    fn build(public: &CountyPublic, counts: &[f64]) -> Result<Self> {
        let c = public.len();
        crate::error::check_dim(c * COUNTY_STAT_DIM, counts.len())?;
        let mut data = Vec::with_capacity(c * COUNTY_PARAM_DIM);
        let mut y = Vec::with_capacity(c);
        let mut pops = Vec::with_capacity(c);
        for (i, r) in public.rows.iter().enumerate() {
            let p = r.pop as f64;
            if !(p > 0.0) {
                return Err(Error::Estimator(format!("county {} has zero population", r.county_id)));
            }
            let k = &counts[i * COUNTY_STAT_DIM..(i + 1) * COUNTY_STAT_DIM];
            data.extend_from_slice(&[
                1.0,
                k[0] / p,
                k[1] / p,
                k[2] / p,
                k[3] / p,
                r.unemployed,
                r.poverty,
                r.no_insurance,
                r.housecost,
                r.pop_density,
            ]);
            y.push(k[4] / p);
            pops.push(p);
        }
        Ok(Self {
            x: DenseMatrix::new(c, COUNTY_PARAM_DIM, data)?,
            y,
            pops,
        })
    }

    /// Per-column scale factors (max absolute value), so the normal
    /// equations are solved on comparably sized columns.
    fn column_scales(&self) -> Result<Vec<f64>> {
        let mut s = vec![0.0f64; COUNTY_PARAM_DIM];
        for i in 0..self.x.rows() {
            for (j, v) in self.x.row(i).iter().enumerate() {
                s[j] = s[j].max(v.abs());
            }
        }
        if let Some(j) = s.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::Estimator(format!(
                "rank-deficient design: column '{}' is identically zero",
                COUNTY_PARAM_NAMES[j]
            )));
        }
        Ok(s)
    }

    /// `sum_i w_i z_i r_i` on scaled columns.
    fn weighted_gradient(&self, scales: &[f64], w: &[f64], r: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; COUNTY_PARAM_DIM];
        for i in 0..self.x.rows() {
            let f = w[i] * r[i];
            for (j, v) in self.x.row(i).iter().enumerate() {
                g[j] += f * v / scales[j];
            }
        }
        g
    }

    /// `sum_i w_i z_i z_i^T` and `sum_i w_i z_i r_i` on scaled columns.
    fn weighted_normal_equations(&self, scales: &[f64], w: &[f64], r: &[f64]) -> (DenseMatrix, Vec<f64>) {
        let d = COUNTY_PARAM_DIM;
        let mut a = DenseMatrix::zeros(d, d);
        let mut b = vec![0.0; d];
        let mut z = [0.0; COUNTY_PARAM_DIM];
        for i in 0..self.x.rows() {
            for (j, v) in self.x.row(i).iter().enumerate() {
                z[j] = v / scales[j];
            }
            for j in 0..d {
                let wz = w[i] * z[j];
                b[j] += wz * r[i];
                for l in 0..=j {
                    a[(j, l)] += wz * z[l];
                }
            }
        }
        for j in 0..d {
            for l in 0..j {
                a[(l, j)] = a[(j, l)];
            }
        }
        (a, b)
    }
}

fn rank_error(_: Error) -> Error {
    Error::Estimator("rank-deficient design matrix".into())
}

/// Undo column scaling on a coefficient vector and its covariance.
fn unscale(scales: &[f64], beta_s: &[f64], cov_s: &DenseMatrix) -> Result<EstimateWithCovariance> {
    let d = scales.len();
    let beta = beta_s.iter().zip(scales).map(|(b, s)| b / s).collect();
    let mut cov = DenseMatrix::zeros(d, d);
    for j in 0..d {
        for l in 0..d {
            cov[(j, l)] = cov_s[(j, l)] / (scales[j] * scales[l]);
        }
    }
    cov.symmetrize();
    EstimateWithCovariance::new(beta, cov)
}

fn county_statistic(public: &CountyPublic, raw: &RawData, task_id: &str) -> Result<SummaryStatistic> {
    let RawData::Counties(table) = raw else {
        return Err(Error::param("county task expects a county table"));
    };
    crate::error::check_dim(public.len(), table.rows.len())?;
    for (p, r) in public.rows.iter().zip(&table.rows) {
        if p.pop != r.pop || p.county_id != r.county_id {
            return Err(Error::param(format!("county table row '{}' does not match the public schema", r.county_id)));
        }
    }
    Ok(SummaryStatistic::new(task_id, table.rows.len() as u64, table.stacked_counts()))
}

fn validate_public(public: &CountyPublic) -> Result<()> {
    if public.len() <= COUNTY_PARAM_DIM {
        return Err(Error::param(format!(
            "county models need more than {COUNTY_PARAM_DIM} counties, got {}",
            public.len()
        )));
    }
    Ok(())
}

/// OLS of the homeownership proportion on the county covariates, with the
/// classical covariance `sigma^2 (X^T X)^{-1}`, `sigma^2 = RSS / (C - 10)`.
#[derive(Clone, Debug)]
pub struct CountyLinearModel {
    public: CountyPublic,
    support: CountSupport,
}

impl CountyLinearModel {
    pub fn new(public: CountyPublic, support: CountSupport) -> Result<Self> {
        validate_public(&public)?;
        Ok(Self { public, support })
    }

    pub fn public(&self) -> &CountyPublic {
        &self.public
    }

    pub fn estimate_counts(&self, counts: &[f64]) -> Result<EstimateWithCovariance> {
        let design = CountyDesign::build(&self.public, counts)?;
        let scales = design.column_scales()?;
        let ones = vec![1.0; design.y.len()];
        let (a, b) = design.weighted_normal_equations(&scales, &ones, &design.y);
        let l = a.cholesky().map_err(rank_error)?;
        let beta_s = crate::linalg::cholesky_solve(&l, &b);
        let c = design.y.len();
        let rss: f64 = (0..c)
            .map(|i| {
                let fit: f64 = design.x.row(i).iter().zip(&beta_s).zip(&scales).map(|((x, b), s)| x / s * b).sum();
                (design.y[i] - fit).powi(2)
            })
            .sum();
        let sigma2 = rss / (c - COUNTY_PARAM_DIM) as f64;
        let inv = a.inverse_spd().map_err(rank_error)?;
        unscale(&scales, &beta_s, &inv.scaled(sigma2))
    }
}

impl TaskModel for CountyLinearModel {
    fn task_id(&self) -> &str {
        LINEAR_TASK_ID
    }

    fn k(&self) -> usize {
        COUNTY_STAT_DIM * self.public.len()
    }

    fn d(&self) -> usize {
        COUNTY_PARAM_DIM
    }

    fn param_names(&self) -> Vec<String> {
        COUNTY_PARAM_NAMES.iter().map(|s| s.to_string()).collect()
    }

    fn statistic(&self, raw: &RawData) -> Result<SummaryStatistic> {
        county_statistic(&self.public, raw, LINEAR_TASK_ID)
    }

    fn constraints(&self, _n: u64) -> Result<ConstraintSet> {
        county_table_constraints(&self.public.populations(), self.support)
    }

    fn estimate(&self, t: &SummaryStatistic) -> Result<EstimateWithCovariance> {
        check_task(self, t)?;
        self.estimate_counts(&t.values)
    }
}

/// Logistic regression of the homeownership proportion with county
/// population weights, fitted by damped Newton-Raphson. The covariance is
/// the inverse of the population-weighted Fisher information.
#[derive(Clone, Debug)]
pub struct CountyLogisticModel {
    public: CountyPublic,
    support: CountSupport,
}

/// Result of a weighted logistic fit, including the final gradient of the
/// log-likelihood with weights normalized to mean one.
#[derive(Clone, Debug)]
pub struct LogisticFit {
    pub estimate: EstimateWithCovariance,
    pub iterations: usize,
    pub gradient_norm: f64,
}

fn expit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(eta))` without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

impl CountyLogisticModel {
    pub fn new(public: CountyPublic, support: CountSupport) -> Result<Self> {
        validate_public(&public)?;
        Ok(Self { public, support })
    }

    pub fn public(&self) -> &CountyPublic {
        &self.public
    }

    pub fn fit_counts(&self, counts: &[f64]) -> Result<LogisticFit> {
        let design = CountyDesign::build(&self.public, counts)?;
        let scales = design.column_scales()?;
        let c = design.y.len();
        let total_pop: f64 = design.pops.iter().sum();
        let w: Vec<f64> = design.pops.iter().map(|p| p * c as f64 / total_pop).collect();

        let eta_of = |beta: &[f64], i: usize| -> f64 {
            design.x.row(i).iter().zip(beta).zip(&scales).map(|((x, b), s)| x / s * b).sum()
        };
        let loglik = |beta: &[f64]| -> f64 {
            (0..c)
                .map(|i| {
                    let eta = eta_of(beta, i);
                    w[i] * (design.y[i] * eta - softplus(eta))
                })
                .sum()
        };

        let ybar: f64 = (0..c).map(|i| w[i] * design.y[i]).sum::<f64>() / c as f64;
        let ybar = ybar.clamp(1e-6, 1.0 - 1e-6);
        let mut beta = vec![0.0; COUNTY_PARAM_DIM];
        beta[0] = (ybar / (1.0 - ybar)).ln() * scales[0];
        let mut ll = loglik(&beta);

        let zeros = vec![0.0; c];
        let mut grad_norm = f64::INFINITY;
        for iter in 1..=NEWTON_MAX_ITER {
            let mut hw = vec![0.0; c];
            let mut resid = vec![0.0; c];
            for i in 0..c {
                let p = expit(eta_of(&beta, i));
                hw[i] = w[i] * p * (1.0 - p);
                resid[i] = design.y[i] - p;
            }
            let (h, _) = design.weighted_normal_equations(&scales, &hw, &zeros);
            let g = design.weighted_gradient(&scales, &w, &resid);
            grad_norm = unscaled_gradient_norm(&g, &scales);
            let step = h.solve_spd(&g).map_err(rank_error)?;
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..40 {
                let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
                let trial_ll = loglik(&trial);
                if trial_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                    beta = trial;
                    ll = trial_ll;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            let step_norm = t * step.iter().map(|s| s * s).sum::<f64>().sqrt();
            if moved && step_norm > 1e-11 {
                continue;
            }
            let mut hw = vec![0.0; c];
            let mut resid = vec![0.0; c];
            for i in 0..c {
                let p = expit(eta_of(&beta, i));
                hw[i] = design.pops[i] * p * (1.0 - p);
                resid[i] = design.y[i] - p;
            }
            grad_norm = unscaled_gradient_norm(&design.weighted_gradient(&scales, &w, &resid), &scales);
            if grad_norm > GRADIENT_TOLERANCE {
                break;
            }
            let (info, _) = design.weighted_normal_equations(&scales, &hw, &zeros);
            let inv = info.inverse_spd().map_err(rank_error)?;
            return Ok(LogisticFit {
                estimate: unscale(&scales, &beta, &inv)?,
                iterations: iter,
                gradient_norm: grad_norm,
            });
        }
        Err(Error::NoConvergence {
            iterations: NEWTON_MAX_ITER,
            grad_norm,
        })
    }
}

/// Norm of the log-likelihood gradient with respect to the original
/// (unscaled) coefficients.
fn unscaled_gradient_norm(g_scaled: &[f64], scales: &[f64]) -> f64 {
    g_scaled.iter().zip(scales).map(|(g, s)| (g * s).powi(2)).sum::<f64>().sqrt()
}

impl TaskModel for CountyLogisticModel {
    fn task_id(&self) -> &str {
        LOGISTIC_TASK_ID
    }

    fn k(&self) -> usize {
        COUNTY_STAT_DIM * self.public.len()
    }

    fn d(&self) -> usize {
        COUNTY_PARAM_DIM
    }

    fn param_names(&self) -> Vec<String> {
        COUNTY_PARAM_NAMES.iter().map(|s| s.to_string()).collect()
    }

    fn statistic(&self, raw: &RawData) -> Result<SummaryStatistic> {
        county_statistic(&self.public, raw, LOGISTIC_TASK_ID)
    }

    fn constraints(&self, _n: u64) -> Result<ConstraintSet> {
        county_table_constraints(&self.public.populations(), self.support)
    }

    fn estimate(&self, t: &SummaryStatistic) -> Result<EstimateWithCovariance> {
        check_task(self, t)?;
        Ok(self.fit_counts(&t.values)?.estimate)
    }
}
