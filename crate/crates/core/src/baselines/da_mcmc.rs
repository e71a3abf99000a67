//! Data-augmentation MCMC for simple regression under a Gaussian working
//! model.
//!
//! Latent records `(x_i, y_i)` are carried alongside the parameters.
//! Parameters are updated by conjugate Gibbs steps given the records' sums;
//! each record is then offered a replacement drawn from the working model and
//! the swap is accepted with the ratio of mechanism densities at the old and
//! new sums.
//!
//! Working model: `x_i ~ N(mu, 1/phi)`, `y_i | x_i ~ N(b0 + b1 x_i, 1/tau)`,
//! with `beta | tau ~ N(m, (tau V)^-1)`, `tau ~ Gamma(a/2, rate b/2)`,
//! `phi ~ Gamma(d/2, rate 1/(2W))` (a one-dimensional Wishart) and
//! `mu ~ N(theta0, sigma0)`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::mechanisms::{log_density, PrivateRelease};
use crate::pumba::CredibleInterval;
use crate::rng::RngHandle;
use crate::sampling::{sample_gamma, standard_normal, uniform01};
use crate::stats::{effective_sample_size, quantile_sorted};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DaMcmcConfig {
    pub chain_length: usize,
    pub burn_in: usize,
    /// Record-swap sweeps run from the initial state before the chain
    /// proper starts.
    pub warmup_sweeps: usize,
    pub m: [f64; 2],
    /// Prior precision factor for `beta`, row-major 2x2.
    pub v: [f64; 4],
    pub a: f64,
    pub b: f64,
    pub theta0: f64,
    pub sigma0: f64,
    pub d: f64,
    pub w: f64,
}

impl Default for DaMcmcConfig {
    fn default() -> Self {
        Self {
            chain_length: 10_000,
            burn_in: 5_000,
            warmup_sweeps: 100,
            m: [0.0, 0.0],
            v: [0.01, 0.0, 0.0, 0.01],
            a: 2.0,
            b: 2.0,
            theta0: 0.5,
            sigma0: 1.0,
            d: 3.0,
            w: 1.0,
        }
    }
}

impl DaMcmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.chain_length {
            return Err(Error::Config("burn-in must be shorter than the chain".into()));
        }
        if self.v[1] != self.v[2] || !DenseMatrix::new(2, 2, self.v.to_vec())?.is_positive_definite() {
            return Err(Error::Config("prior precision V must be symmetric positive definite".into()));
        }
        for (name, v) in [("a", self.a), ("b", self.b), ("sigma0", self.sigma0), ("d", self.d), ("w", self.w)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("hyperparameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmcOutput {
    pub beta0: Vec<f64>,
    pub beta1: Vec<f64>,
    pub tau: Vec<f64>,
    pub mu: Vec<f64>,
    pub phi: Vec<f64>,
    /// Effective sample size of the kept `beta1` draws.
    pub ess_beta1: f64,
    /// Wall-clock time of the whole chain, including burn-in.
    pub seconds: f64,
    /// Fraction of record swaps accepted over the whole chain.
    pub swap_acceptance: f64,
}

impl McmcOutput {
    /// Equal-tailed quantile intervals for `(beta0, beta1)`.
    pub fn intervals(&self, level: f64) -> Vec<CredibleInterval> {
        let alpha = 1.0 - level;
        [&self.beta0, &self.beta1]
            .iter()
            .map(|c| {
                let mut v = (*c).clone();
                v.sort_by(f64::total_cmp);
                CredibleInterval {
                    lo: quantile_sorted(&v, alpha / 2.0),
                    hi: quantile_sorted(&v, 1.0 - alpha / 2.0),
                    level,
                }
            })
            .collect()
    }

    pub fn posterior_mean(&self) -> [f64; 2] {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        [mean(&self.beta0), mean(&self.beta1)]
    }

    pub fn ess_per_second(&self) -> f64 {
        self.ess_beta1 / self.seconds.max(1e-12)
    }
}

#[derive(Clone, Copy, Debug)]
struct Params {
    beta: [f64; 2],
    tau: f64,
    mu: f64,
    phi: f64,
}

fn record_stat(x: f64, y: f64) -> [f64; 5] {
    [x, x * x, y, y * y, x * y]
}

fn draw_record(rng: &mut RngHandle, p: &Params) -> (f64, f64) {
    let x = p.mu + standard_normal(rng) / p.phi.sqrt();
    let y = p.beta[0] + p.beta[1] * x + standard_normal(rng) / p.tau.sqrt();
    (x, y)
}

/// `beta | tau ~ N(mean, (tau * prec)^-1)` via the Cholesky factor of `prec`.
fn draw_beta(rng: &mut RngHandle, mean: [f64; 2], prec: &DenseMatrix, tau: f64) -> Result<[f64; 2]> {
    let l = prec.cholesky().map_err(|_| Error::Numerical("posterior precision of beta is not positive definite".into()))?;
    let z = [standard_normal(rng) / tau.sqrt(), standard_normal(rng) / tau.sqrt()];
    // solve L^T u = z
    let u1 = z[1] / l[(1, 1)];
    let u0 = (z[0] - l[(1, 0)] * u1) / l[(0, 0)];
    Ok([mean[0] + u0, mean[1] + u1])
}

fn prior_draw(rng: &mut RngHandle, cfg: &DaMcmcConfig) -> Result<Params> {
    let tau = sample_gamma(rng, cfg.a / 2.0, cfg.b / 2.0)?;
    let phi = sample_gamma(rng, cfg.d / 2.0, 1.0 / (2.0 * cfg.w))?;
    let mu = cfg.theta0 + cfg.sigma0.sqrt() * standard_normal(rng);
    let v = DenseMatrix::new(2, 2, cfg.v.to_vec())?;
    let beta = draw_beta(rng, cfg.m, &v, tau)?;
    Ok(Params { beta, tau, mu, phi })
}

/// Conjugate update of all parameters given the record sums `t`.
fn gibbs_update(rng: &mut RngHandle, cfg: &DaMcmcConfig, n: f64, t: &[f64; 5], p: &mut Params) -> Result<()> {
    let [sx, sxx, sy, syy, sxy] = *t;

    // mu | x, phi
    let prec = 1.0 / cfg.sigma0 + n * p.phi;
    let mean = (cfg.theta0 / cfg.sigma0 + p.phi * sx) / prec;
    p.mu = mean + standard_normal(rng) / prec.sqrt();

    // phi | x, mu
    let ss = (sxx - 2.0 * p.mu * sx + n * p.mu * p.mu).max(0.0);
    p.phi = sample_gamma(rng, (cfg.d + n) / 2.0, 1.0 / (2.0 * cfg.w) + ss / 2.0)?;

    // (beta, tau) | x, y
    let v = &cfg.v;
    let vn = DenseMatrix::new(2, 2, vec![v[0] + n, v[1] + sx, v[2] + sx, v[3] + sxx])?;
    let rhs = [v[0] * cfg.m[0] + v[1] * cfg.m[1] + sy, v[2] * cfg.m[0] + v[3] * cfg.m[1] + sxy];
    let mn = vn
        .solve_spd(&rhs)
        .map_err(|_| Error::Numerical(format!("regression posterior precision singular at sums {t:?}")))?;
    let prior_quad = cfg.m[0] * (v[0] * cfg.m[0] + v[1] * cfg.m[1]) + cfg.m[1] * (v[2] * cfg.m[0] + v[3] * cfg.m[1]);
    let post_quad = mn[0] * rhs[0] + mn[1] * rhs[1];
    let bn = cfg.b + syy + prior_quad - post_quad;
    if !(bn > 0.0) || !bn.is_finite() {
        return Err(Error::Numerical(format!("non-positive residual scale {bn} at sums {t:?}")));
    }
    p.tau = sample_gamma(rng, (cfg.a + n) / 2.0, bn / 2.0)?;
    p.beta = draw_beta(rng, [mn[0], mn[1]], &vn, p.tau)?;
    Ok(())
}

struct Records {
    x: Vec<f64>,
    y: Vec<f64>,
    t: [f64; 5],
}

impl Records {
    fn new(rng: &mut RngHandle, n: usize, p: &Params) -> Self {
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        let mut t = [0.0; 5];
        for _ in 0..n {
            let (xi, yi) = draw_record(rng, p);
            x.push(xi);
            y.push(yi);
            for (a, b) in t.iter_mut().zip(record_stat(xi, yi)) {
                *a += b;
            }
        }
        Self { x, y, t }
    }

    /// Recompute sums from the records to shed accumulated rounding.
    fn resum(&mut self) {
        let mut t = [0.0; 5];
        for (&xi, &yi) in self.x.iter().zip(&self.y) {
            for (a, b) in t.iter_mut().zip(record_stat(xi, yi)) {
                *a += b;
            }
        }
        self.t = t;
    }

    /// Offer every record one swap. Returns the number accepted.
    fn sweep(&mut self, rng: &mut RngHandle, p: &Params, release: &PrivateRelease) -> Result<u64> {
        let mut current = log_density(&release.noise, &release.s_dp, &self.t)?;
        let mut accepted = 0;
        let mut trial = [0.0; 5];
        for i in 0..self.x.len() {
            let (xn, yn) = draw_record(rng, p);
            let old = record_stat(self.x[i], self.y[i]);
            let new = record_stat(xn, yn);
            for j in 0..5 {
                trial[j] = self.t[j] - old[j] + new[j];
            }
            let proposed = log_density(&release.noise, &release.s_dp, &trial)?;
            let log_ratio = proposed - current;
            if log_ratio >= 0.0 || uniform01(rng).ln() < log_ratio {
                self.x[i] = xn;
                self.y[i] = yn;
                self.t = trial;
                current = proposed;
                accepted += 1;
            }
        }
        Ok(accepted)
    }
}

/// Run the chain on a five-sum regression release.
pub fn da_mcmc(rng: &mut RngHandle, release: &PrivateRelease, cfg: &DaMcmcConfig) -> Result<McmcOutput> {
    cfg.validate()?;
    crate::error::check_dim(5, release.s_dp.len())?;
    let n = release.n as usize;
    if n < 2 {
        return Err(Error::param("data augmentation needs at least two records"));
    }
    let start = Instant::now();
    let mut params = prior_draw(rng, cfg)?;
    let mut records = Records::new(rng, n, &params);
    for _ in 0..cfg.warmup_sweeps {
        records.sweep(rng, &params, release)?;
    }

    let kept = cfg.chain_length - cfg.burn_in;
    let mut out = McmcOutput {
        beta0: Vec::with_capacity(kept),
        beta1: Vec::with_capacity(kept),
        tau: Vec::with_capacity(kept),
        mu: Vec::with_capacity(kept),
        phi: Vec::with_capacity(kept),
        ess_beta1: 0.0,
        seconds: 0.0,
        swap_acceptance: 0.0,
    };
    let mut accepted = 0u64;
    for it in 0..cfg.chain_length {
        gibbs_update(rng, cfg, n as f64, &records.t, &mut params)?;
        accepted += records.sweep(rng, &params, release)?;
        if it % 100 == 99 {
            records.resum();
        }
        if it >= cfg.burn_in {
            out.beta0.push(params.beta[0]);
            out.beta1.push(params.beta[1]);
            out.tau.push(params.tau);
            out.mu.push(params.mu);
            out.phi.push(params.phi);
        }
    }
    out.seconds = start.elapsed().as_secs_f64();
    out.ess_beta1 = effective_sample_size(&out.beta1);
    out.swap_acceptance = accepted as f64 / (cfg.chain_length as f64 * n as f64);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{NoiseFamily, PrivacyBudget, PrivacyRegime};

    fn release(s: Vec<f64>, n: u64, sd: f64) -> PrivateRelease {
        PrivateRelease {
            task_id: "linreg_ssp".into(),
            n,
            s_dp: s,
            noise: NoiseFamily::gaussian(vec![sd; 5]).unwrap(),
            budget: PrivacyBudget::new(5f64.sqrt() / sd, PrivacyRegime::GaussianDp, vec![1.0; 5]).unwrap(),
        }
    }

    #[test]
    fn config_validation() {
        assert!(DaMcmcConfig::default().validate().is_ok());
        let bad = DaMcmcConfig {
            burn_in: 10_000,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = DaMcmcConfig {
            v: [1.0, 2.0, 2.0, 1.0],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn tiny_noise_concentrates_near_least_squares() {
        // sums of a 50-point dataset on y = 0.2 + 0.6 x + small noise
        let mut rng = RngHandle::new(3, 0);
        let n = 50;
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let x = (i as f64 + 0.5) / n as f64;
                (x, 0.2 + 0.6 * x + 0.02 * standard_normal(&mut rng))
            })
            .collect();
        let t = crate::models::linreg::regression_sums(&pts);
        let ols = crate::models::SimpleOls::from_sums(n as f64, &t).unwrap();
        let cfg = DaMcmcConfig {
            chain_length: 3000,
            burn_in: 1500,
            ..Default::default()
        };
        let out = da_mcmc(&mut rng, &release(t.to_vec(), n, 0.05), &cfg).unwrap();
        let post = out.posterior_mean();
        assert!((post[1] - ols.beta[1]).abs() < 0.1, "{post:?} vs {:?}", ols.beta);
        assert!(out.ess_beta1 <= out.beta1.len() as f64);
        assert_eq!(out.beta1.len(), 1500);
        assert!(out.seconds > 0.0);
    }

    #[test]
    fn swap_ratio_obeys_sensitivity_bound() {
        // For additive noise, one swap moves the sums by at most the change in
        // the record statistic, so the log-density ratio is bounded by the
        // triangle inequality on each Laplace coordinate.
        let noise = NoiseFamily::laplace(vec![5.0; 5]).unwrap();
        let mut rng = RngHandle::new(4, 0);
        let s = [10.0, 5.0, 8.0, 4.0, 6.0];
        for _ in 0..1000 {
            let t: Vec<f64> = (0..5).map(|_| 20.0 * uniform01(&mut rng)).collect();
            let (x0, y0, x1, y1) = (uniform01(&mut rng), uniform01(&mut rng), uniform01(&mut rng), uniform01(&mut rng));
            let (a, b) = (record_stat(x0, y0), record_stat(x1, y1));
            let t2: Vec<f64> = (0..5).map(|j| t[j] - a[j] + b[j]).collect();
            let ratio = log_density(&noise, &s, &t2).unwrap() - log_density(&noise, &s, &t).unwrap();
            // each coordinate of a record statistic in the unit square moves by at most 1
            assert!(ratio >= -5.0 / 5.0 - 1e-12);
        }
    }
}
