//! Synthetic data for the simulation designs.

use crate::error::{Error, Result};
use crate::experiments::config::{CountyConfig, Design};
use crate::models::county::COUNTY_PARAM_DIM;
use crate::models::{CountyRecord, CountyTable};
use crate::rng::RngHandle;
use crate::sampling::{sample_beta, sample_binomial, sample_normal, sample_uniform};

/// `n` iid Beta(a, b) observations.
pub fn generate_bounded_mean_data(rng: &mut RngHandle, n: usize, a: f64, b: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::param("sample size must be positive"));
    }
    (0..n).map(|_| sample_beta(rng, a, b)).collect()
}

/// Mean and variance of Beta(a, b).
pub fn beta_moments(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (a / s, a * b / (s * s * (s + 1.0)))
}

/// `x ~ U(0, 1)` and `y = beta0 + beta1 x + e` with `e ~ (Beta(4, 4) - 1/2) / 2`,
/// which has mean zero and standard deviation 1/12.
pub fn generate_linreg_data(rng: &mut RngHandle, n: usize, beta0: f64, beta1: f64) -> Result<Vec<(f64, f64)>> {
    if n < 3 {
        return Err(Error::param("regression needs at least three observations"));
    }
    let (lo, hi) = (beta0.min(beta0 + beta1), beta0.max(beta0 + beta1));
    if lo < 0.25 || hi > 0.75 {
        return Err(Error::param("regression line must stay in [0.25, 0.75] on [0, 1] so that y lies in [0, 1]"));
    }
    (0..n)
        .map(|_| {
            let x = sample_uniform(rng, 0.0, 1.0)?;
            let e = (sample_beta(rng, 4.0, 4.0)? - 0.5) / 2.0;
            let y = beta0 + beta1 * x + e;
            assert!((0.0..=1.0).contains(&y), "generated response {y} outside [0, 1]");
            Ok((x, y))
        })
        .collect()
}

/// Residual standard deviation of [`generate_linreg_data`].
pub const LINREG_NOISE_SD: f64 = 1.0 / 12.0;

const ETHNICITY_RATE_MAX: [f64; 4] = [0.30, 0.10, 0.05, 0.10];

fn log_uniform(rng: &mut RngHandle, lo: f64, hi: f64) -> Result<f64> {
    if lo == hi {
        return Ok(lo);
    }
    Ok(sample_uniform(rng, lo.ln(), hi.ln())?.exp())
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// A synthetic county table. Ethnicity counts are multinomial given the
/// county population; homeowners are binomial with probability given by the
/// linear (clamped, with county-level normal error) or logistic link
/// applied to the county's covariates.
pub fn generate_county_table(rng: &mut RngHandle, cfg: &CountyConfig, design: Design) -> Result<CountyTable> {
    let beta = cfg.true_coefficients(design)?;
    let mut rows = Vec::with_capacity(cfg.counties);
    for c in 0..cfg.counties {
        let pop = log_uniform(rng, cfg.pop_min, cfg.pop_max)?.round().max(1.0) as u64;
        let mut eth = [0.0; 4];
        let mut left = pop;
        let mut mass_left = 1.0;
        for (j, max) in ETHNICITY_RATE_MAX.iter().enumerate() {
            let p = sample_uniform(rng, 0.0, *max)?;
            let k = sample_binomial(rng, left, (p / mass_left).min(1.0))?;
            eth[j] = k as f64;
            left -= k;
            mass_left -= p;
        }
        let unemployed = sample_uniform(rng, 0.02, 0.10)?;
        let poverty = sample_uniform(rng, 0.05, 0.30)?;
        let no_insurance = sample_uniform(rng, 0.03, 0.20)?;
        let housecost = sample_uniform(rng, 0.5, 3.0)?;
        let pop_density = log_uniform(rng, 1.0, 5000.0)?;
        let popf = pop as f64;
        let x: [f64; COUNTY_PARAM_DIM] = [
            1.0,
            eth[0] / popf,
            eth[1] / popf,
            eth[2] / popf,
            eth[3] / popf,
            unemployed,
            poverty,
            no_insurance,
            housecost,
            pop_density,
        ];
        let eta: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
        let p = match design {
            Design::CountyLinear => (eta + sample_normal(rng, 0.0, cfg.noise_sd)?).clamp(0.0, 1.0),
            _ => expit(eta),
        };
        let homeowners = sample_binomial(rng, pop, p)? as f64;
        rows.push(CountyRecord {
            county_id: format!("c{c:04}"),
            pop,
            homeowners,
            eth_black: eth[0],
            eth_asian: eth[1],
            eth_indig: eth[2],
            eth_other: eth[3],
            unemployed,
            poverty,
            no_insurance,
            housecost,
            pop_density,
        });
    }
    Ok(CountyTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::Hypothesis;
    use crate::stats::{mean, variance};

    #[test]
    fn bounded_mean_moments() {
        let mut rng = RngHandle::new(3, 0);
        let x = generate_bounded_mean_data(&mut rng, 200_000, 2.0, 4.0).unwrap();
        let (m, v) = beta_moments(2.0, 4.0);
        assert!((mean(&x) - m).abs() < 0.003);
        assert!((variance(&x) - v).abs() < 0.001);
        assert!(x.iter().all(|t| (0.0..=1.0).contains(t)));
        assert!(generate_bounded_mean_data(&mut rng, 0, 2.0, 4.0).is_err());
    }

    #[test]
    fn linreg_data_in_unit_square() {
        let mut rng = RngHandle::new(4, 0);
        let d = generate_linreg_data(&mut rng, 50_000, 0.25, 0.5).unwrap();
        assert!(d.iter().all(|(x, y)| (0.0..=1.0).contains(x) && (0.0..=1.0).contains(y)));
        let ys: Vec<f64> = d.iter().map(|p| p.1 - 0.25 - 0.5 * p.0).collect();
        assert!((variance(&ys).sqrt() / LINREG_NOISE_SD - 1.0).abs() < 0.02);
        assert!(generate_linreg_data(&mut rng, 10, 0.0, 1.0).is_err());
        assert!(generate_linreg_data(&mut rng, 2, 0.25, 0.5).is_err());
    }

    #[test]
    fn county_counts_are_consistent() {
        let mut rng = RngHandle::new(5, 0);
        let cfg = CountyConfig {
            counties: 50,
            hypothesis: Hypothesis::Alternative,
            ..Default::default()
        };
        for design in [Design::CountyLinear, Design::CountyLogistic] {
            let t = generate_county_table(&mut rng, &cfg, design).unwrap();
            assert_eq!(t.rows.len(), 50);
            for r in &t.rows {
                let eth: f64 = r.counts()[..4].iter().sum();
                assert!(eth <= r.pop as f64);
                assert!(r.homeowners <= r.pop as f64);
                assert!(r.pop >= 1000 && r.pop <= 1_000_000);
                assert!(r.counts().iter().all(|c| c.fract() == 0.0 && *c >= 0.0));
            }
        }
    }
}
