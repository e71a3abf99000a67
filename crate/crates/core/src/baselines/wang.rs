//! Intervals for a bounded mean that treat the noisy sample mean as the sum
//! of a normal sampling error and the Laplace privacy noise.

use crate::error::{Error, Result};
use crate::mechanisms::{NoiseKind, PrivateRelease};
use crate::pumba::CredibleInterval;
use crate::stats::norm_cdf;

const LAPLACE_TAIL_CUTOFF: f64 = 50.0;

/// `P(Z + L <= q)` for `Z ~ N(0, sd^2)` and `L ~ Laplace(0, b)`.
///
/// Writing `L = +-b U` with `U ~ Exp(1)` gives
/// `F(q) = 1/2 int_0^inf [Phi((q - b u)/sd) + Phi((q + b u)/sd)] e^{-u} du`,
/// evaluated by adaptive Simpson quadrature on `[0, 50]`.
pub fn convolution_cdf(q: f64, sd: f64, b: f64) -> f64 {
    if b == 0.0 {
        return if sd == 0.0 { f64::from(q >= 0.0) } else { norm_cdf(q / sd) };
    }
    if sd == 0.0 {
        return if q < 0.0 { 0.5 * (q / b).exp() } else { 1.0 - 0.5 * (-q / b).exp() };
    }
    let f = |u: f64| 0.5 * (norm_cdf((q - b * u) / sd) + norm_cdf((q + b * u) / sd)) * (-u).exp();
    // split at the kinks of the integrand's normal terms for better accuracy
    let mut knots = vec![0.0, LAPLACE_TAIL_CUTOFF];
    let kink = q.abs() / b;
    if kink > 0.0 && kink < LAPLACE_TAIL_CUTOFF {
        knots.insert(1, kink);
    }
    knots.windows(2).map(|w| adaptive_simpson(&f, w[0], w[1], 1e-13, 50)).sum()
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Upper `1 - alpha/2` quantile of the centred convolution, found by
/// bisection to `1e-10`.
pub fn convolution_quantile(sd: f64, b: f64, level: f64) -> Result<f64> {
    if !(sd >= 0.0) || !(b >= 0.0) || (sd == 0.0 && b == 0.0) {
        return Err(Error::param("convolution needs non-negative scales, not both zero"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::param(format!("level must lie in (0, 1), got {level}")));
    }
    let alpha = 1.0 - level;
    if sd == 0.0 {
        return Ok(b * (1.0 / alpha).ln());
    }
    let target = 1.0 - alpha / 2.0;
    let (mut lo, mut hi) = (0.0, sd + b);
    while convolution_cdf(hi, sd, b) < target {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-10 * hi.max(1e-300) && hi - lo > 1e-300 {
        let mid = 0.5 * (lo + hi);
        if convolution_cdf(mid, sd, b) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn mean_scale_laplace(release: &PrivateRelease) -> Result<(f64, f64)> {
    if release.noise.kind != NoiseKind::Laplace {
        return Err(Error::param("convolution interval needs Laplace noise on the first sum"));
    }
    let n = release.n as f64;
    Ok((release.s_dp[0] / n, release.noise.scales[0] / n))
}

/// Interval for the mean with the data variance supplied externally.
pub fn wang_known_variance_interval(release: &PrivateRelease, sigma2: f64, level: f64) -> Result<CredibleInterval> {
    if !(sigma2 >= 0.0) {
        return Err(Error::param(format!("variance must be non-negative, got {sigma2}")));
    }
    let (s1, b) = mean_scale_laplace(release)?;
    let sd = (sigma2 / release.n as f64).sqrt();
    let q = convolution_quantile(sd, b, level)?;
    Ok(CredibleInterval {
        lo: s1 - q,
        hi: s1 + q,
        level,
    })
}

/// Plug-in variance `max(s2 - s1^2, 0)` from the noisy mean-scale moments.
pub fn plugin_variance(release: &PrivateRelease) -> f64 {
    let n = release.n as f64;
    let (s1, s2) = (release.s_dp[0] / n, release.s_dp[1] / n);
    (s2 - s1 * s1).max(0.0)
}

/// As [`wang_known_variance_interval`] with the plug-in variance.
pub fn wang_plugin_interval(release: &PrivateRelease, level: f64) -> Result<CredibleInterval> {
    if release.s_dp.len() < 2 {
        return Err(Error::param("plug-in interval needs both noisy moments"));
    }
    wang_known_variance_interval(release, plugin_variance(release), level)
}
