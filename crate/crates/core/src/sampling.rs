//! Random variate generation on top of [`RngHandle`].

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::rng::RngHandle;

pub fn standard_normal(rng: &mut RngHandle) -> f64 {
    StandardNormal.sample(rng)
}

pub fn standard_exponential(rng: &mut RngHandle) -> f64 {
    Exp1.sample(rng)
}

/// Uniform on `[0, 1)`.
pub fn uniform01(rng: &mut RngHandle) -> f64 {
    rng.random::<f64>()
}

pub fn sample_uniform(rng: &mut RngHandle, lo: f64, hi: f64) -> Result<f64> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::param(format!("uniform bounds must satisfy lo < hi, got [{lo}, {hi}]")));
    }
    Ok(lo + (hi - lo) * uniform01(rng))
}

/// Laplace(location, scale), drawn as a symmetric exponential.
pub fn sample_laplace(rng: &mut RngHandle, location: f64, scale: f64) -> Result<f64> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::param(format!("Laplace scale must be positive, got {scale}")));
    }
    let e = standard_exponential(rng);
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    Ok(location + sign * scale * e)
}

pub fn sample_normal(rng: &mut RngHandle, mean: f64, sd: f64) -> Result<f64> {
    if !(sd >= 0.0) || !sd.is_finite() {
        return Err(Error::param(format!("normal sd must be non-negative, got {sd}")));
    }
    Ok(mean + sd * standard_normal(rng))
}

/// Factor `A` with `A A^T = cov`: Cholesky when the matrix is positive
/// definite, otherwise a symmetric eigen-factor for PSD matrices with a
/// numerically zero spectrum tail.
pub fn covariance_factor(cov: &DenseMatrix) -> Result<DenseMatrix> {
    if !cov.is_square() {
        return Err(Error::param("covariance must be square"));
    }
    if !cov.is_symmetric() {
        return Err(Error::param("covariance must be symmetric"));
    }
    if let Ok(l) = cov.cholesky() {
        return Ok(l);
    }
    let (vals, vecs) = cov.symmetric_eigen()?;
    let top = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * top.max(1e-300);
    if vals.iter().any(|&v| v < -tol) {
        return Err(Error::param("covariance has a negative eigenvalue"));
    }
    let n = cov.rows();
    let mut a = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let s = vals[j].max(0.0).sqrt();
        for i in 0..n {
            a[(i, j)] = vecs[(i, j)] * s;
        }
    }
    Ok(a)
}

/// Multivariate normal draw.
pub fn sample_gaussian(rng: &mut RngHandle, mean: &[f64], cov: &DenseMatrix) -> Result<Vec<f64>> {
    if cov.rows() != mean.len() {
        return Err(Error::Dimension {
            expected: mean.len(),
            got: cov.rows(),
        });
    }
    let a = covariance_factor(cov)?;
    Ok(sample_gaussian_factored(rng, mean, &a))
}

/// Multivariate normal draw given a precomputed factor from
/// [`covariance_factor`].
pub fn sample_gaussian_factored(rng: &mut RngHandle, mean: &[f64], factor: &DenseMatrix) -> Vec<f64> {
    let n = mean.len();
    let z: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
    (0..n)
        .map(|i| mean[i] + (0..n).map(|j| factor[(i, j)] * z[j]).sum::<f64>())
        .collect()
}

/// Gamma(shape, rate).
pub fn sample_gamma(rng: &mut RngHandle, shape: f64, rate: f64) -> Result<f64> {
    if !(shape > 0.0) || !(rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
        return Err(Error::param(format!("gamma needs positive shape and rate, got ({shape}, {rate})")));
    }
    let g = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::param(e.to_string()))?;
    Ok(g.sample(rng))
}

/// Beta(a, b) as `X / (X + Y)` with independent gamma variates.
pub fn sample_beta(rng: &mut RngHandle, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::param(format!("beta shapes must be positive, got ({a}, {b})")));
    }
    let x = sample_gamma(rng, a, 1.0)?;
    let y = sample_gamma(rng, b, 1.0)?;
    Ok(x / (x + y))
}

pub fn sample_binomial(rng: &mut RngHandle, trials: u64, p: f64) -> Result<u64> {
    let d = Binomial::new(trials, p).map_err(|e| Error::param(e.to_string()))?;
    Ok(d.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_statistic, mean, norm_cdf, variance};

    const N: usize = 100_000;

    // Kolmogorov critical value at alpha = 1e-3 for n = 1e5: sqrt(-ln(alpha/2)/(2n)).
    fn ks_crit(n: usize) -> f64 {
        (-(0.5e-3f64).ln() / (2.0 * n as f64)).sqrt()
    }

    #[test]
    fn laplace_moments_and_tail() {
        let mut rng = RngHandle::new(2024, 0);
        let xs: Vec<f64> = (0..N).map(|_| sample_laplace(&mut rng, 5.0, 2.0).unwrap()).collect();
        assert!((mean(&xs) - 5.0).abs() < 0.05);
        assert!((variance(&xs) / 8.0 - 1.0).abs() < 0.10);

        let ys: Vec<f64> = (0..N).map(|_| sample_laplace(&mut rng, 0.0, 1.0).unwrap()).collect();
        let tail = ys.iter().filter(|y| y.abs() > 2f64.ln()).count() as f64 / N as f64;
        assert!((tail - 0.5).abs() < 0.01);

        let cdf = |x: f64| if x < 0.0 { 0.5 * x.exp() } else { 1.0 - 0.5 * (-x).exp() };
        assert!(ks_statistic(&ys, cdf) < ks_crit(N));
    }

    #[test]
    fn laplace_degenerate_scale_and_errors() {
        let mut rng = RngHandle::new(1, 0);
        for _ in 0..100 {
            assert!(sample_laplace(&mut rng, 0.0, 1e-12).unwrap().abs() < 1e-9);
        }
        assert!(sample_laplace(&mut rng, 0.0, 0.0).is_err());
        assert!(sample_laplace(&mut rng, 0.0, -1.0).is_err());
    }

    #[test]
    fn gaussian_standard_and_correlated() {
        let mut rng = RngHandle::new(7, 0);
        let i2 = DenseMatrix::identity(2);
        let draws: Vec<Vec<f64>> = (0..N).map(|_| sample_gaussian(&mut rng, &[0.0, 0.0], &i2).unwrap()).collect();
        for j in 0..2 {
            let col: Vec<f64> = draws.iter().map(|d| d[j]).collect();
            assert!(mean(&col).abs() < 0.02);
            assert!(ks_statistic(&col, norm_cdf) < ks_crit(N));
        }

        let cov = DenseMatrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let f = covariance_factor(&cov).unwrap();
        let draws: Vec<Vec<f64>> = (0..N).map(|_| sample_gaussian_factored(&mut rng, &[1.0, 2.0], &f)).collect();
        let m0 = draws.iter().map(|d| d[0]).sum::<f64>() / N as f64;
        let m1 = draws.iter().map(|d| d[1]).sum::<f64>() / N as f64;
        let mut c = [[0.0; 2]; 2];
        for d in &draws {
            let e = [d[0] - m0, d[1] - m1];
            for a in 0..2 {
                for b in 0..2 {
                    c[a][b] += e[a] * e[b] / (N - 1) as f64;
                }
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                assert!((c[a][b] / cov[(a, b)] - 1.0).abs() < 0.05, "cov[{a}][{b}] = {}", c[a][b]);
            }
        }
    }

    #[test]
    fn gaussian_rejects_indefinite_and_accepts_singular_psd() {
        let mut rng = RngHandle::new(7, 1);
        let bad = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(sample_gaussian(&mut rng, &[0.0, 0.0], &bad).is_err());
        let asym = DenseMatrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]).unwrap();
        assert!(sample_gaussian(&mut rng, &[0.0, 0.0], &asym).is_err());
        let singular = DenseMatrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let x = sample_gaussian(&mut rng, &[0.0, 0.0], &singular).unwrap();
        assert!((x[0] - x[1]).abs() < 1e-8);
    }

    #[test]
    fn beta_two_four_moments() {
        let mut rng = RngHandle::new(99, 0);
        let xs: Vec<f64> = (0..N).map(|_| sample_beta(&mut rng, 2.0, 4.0).unwrap()).collect();
        assert!((mean(&xs) - 1.0 / 3.0).abs() < 0.01);
        assert!((variance(&xs) / (2.0 / 63.0) - 1.0).abs() < 0.10);
        // Beta(2,4) CDF: 1 - (1-x)^4 (1 + 4x) ... via regularized incomplete beta.
        let cdf = |x: f64| {
            let x = x.clamp(0.0, 1.0);
            1.0 - (1.0 - x).powi(5) - 5.0 * x * (1.0 - x).powi(4)
        };
        assert!(ks_statistic(&xs, cdf) < ks_crit(N));
    }

    #[test]
    fn beta_one_one_is_uniform() {
        let mut rng = RngHandle::new(5, 0);
        let xs: Vec<f64> = (0..N).map(|_| sample_beta(&mut rng, 1.0, 1.0).unwrap()).collect();
        let below = xs.iter().filter(|&&x| x <= 0.5).count() as f64 / N as f64;
        assert!((below - 0.5).abs() < 0.01);
        assert!(ks_statistic(&xs, |x| x.clamp(0.0, 1.0)) < ks_crit(N));
    }

    #[test]
    fn shifted_beta_four_four_error_law() {
        let mut rng = RngHandle::new(6, 0);
        let xs: Vec<f64> = (0..N).map(|_| (sample_beta(&mut rng, 4.0, 4.0).unwrap() - 0.5) / 2.0).collect();
        assert!(mean(&xs).abs() < 0.005);
        assert!((variance(&xs).sqrt() * 12.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn beta_rejects_bad_shapes() {
        let mut rng = RngHandle::new(5, 0);
        assert!(sample_beta(&mut rng, 0.0, 1.0).is_err());
        assert!(sample_beta(&mut rng, 1.0, -2.0).is_err());
    }

    #[test]
    fn determinism() {
        let a: Vec<f64> = {
            let mut r = RngHandle::new(8, 2);
            (0..50).map(|_| sample_beta(&mut r, 2.0, 4.0).unwrap()).collect()
        };
        let b: Vec<f64> = {
            let mut r = RngHandle::new(8, 2);
            (0..50).map(|_| sample_beta(&mut r, 2.0, 4.0).unwrap()).collect()
        };
        assert_eq!(a, b);
    }
}
