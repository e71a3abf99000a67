//! Additive noise mechanisms and their densities.
//!
//! Statistics are privatized on the sum scale: `s_dp = T + scale * Z` with
//! coordinatewise independent Laplace or Gaussian `Z`. The mechanism density
//! depends on `s_dp - T` only, which is what makes the imputation step a
//! truncated version of the noise law itself.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::models::SummaryStatistic;
use crate::rng::RngHandle;
use crate::sampling::{sample_laplace, standard_normal};

const BUDGET_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Laplace,
    Gaussian,
}

/// Per-coordinate noise law. `scales` are Laplace scales `b_j` or Gaussian
/// standard deviations `sigma_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseFamily {
    pub kind: NoiseKind,
    pub scales: Vec<f64>,
}

impl NoiseFamily {
    pub fn new(kind: NoiseKind, scales: Vec<f64>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::param("noise family needs at least one coordinate"));
        }
        if let Some(s) = scales.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return Err(Error::param(format!("noise scales must be positive and finite, got {s}")));
        }
        Ok(Self { kind, scales })
    }

    pub fn laplace(scales: Vec<f64>) -> Result<Self> {
        Self::new(NoiseKind::Laplace, scales)
    }

    pub fn gaussian(scales: Vec<f64>) -> Result<Self> {
        Self::new(NoiseKind::Gaussian, scales)
    }

    pub fn dim(&self) -> usize {
        self.scales.len()
    }

    /// Log density of one coordinate's noise at displacement `d`.
    #[inline]
    pub fn coord_log_density(&self, j: usize, d: f64) -> f64 {
        let s = self.scales[j];
        match self.kind {
            NoiseKind::Laplace => -(2.0 * s).ln() - d.abs() / s,
            NoiseKind::Gaussian => {
                -0.5 * (2.0 * std::f64::consts::PI * s * s).ln() - 0.5 * (d / s) * (d / s)
            }
        }
    }

    /// Log of the largest value the coordinate density takes.
    pub fn coord_log_max(&self, j: usize) -> f64 {
        self.coord_log_density(j, 0.0)
    }

    /// Draw one noise displacement for coordinate `j`.
    #[inline]
    pub fn sample_coord(&self, rng: &mut RngHandle, j: usize) -> f64 {
        let s = self.scales[j];
        match self.kind {
            NoiseKind::Laplace => sample_laplace(rng, 0.0, s).expect("scale validated at construction"),
            NoiseKind::Gaussian => s * standard_normal(rng),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrivacyRegime {
    PureDp,
    GaussianDp,
}

/// Declared privacy guarantee.
///
/// `sensitivity` holds either a single value, read as the norm sensitivity
/// of the whole statistic vector (L1 under pure DP, L2 under Gaussian DP),
/// or one value per coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub regime: PrivacyRegime,
    pub sensitivity: Vec<f64>,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, regime: PrivacyRegime, sensitivity: Vec<f64>) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::param(format!("epsilon must be positive, got {epsilon}")));
        }
        if sensitivity.is_empty() || sensitivity.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::param("sensitivities must be positive and finite"));
        }
        Ok(Self {
            epsilon,
            regime,
            sensitivity,
        })
    }

    /// The epsilon actually delivered by `noise` under this budget's regime
    /// and sensitivities. `None` when the noise kind does not match the
    /// regime or the sensitivity vector has the wrong length.
    pub fn implied_epsilon(&self, noise: &NoiseFamily) -> Option<f64> {
        let k = noise.dim();
        let per_coord = match self.sensitivity.len() {
            1 => false,
            len if len == k => true,
            _ => return None,
        };
        match (self.regime, noise.kind) {
            (PrivacyRegime::PureDp, NoiseKind::Laplace) => Some(if per_coord {
                // basic composition
                self.sensitivity.iter().zip(&noise.scales).map(|(d, b)| d / b).sum()
            } else {
                self.sensitivity[0] / min_scale(noise)
            }),
            (PrivacyRegime::GaussianDp, NoiseKind::Gaussian) => Some(if per_coord {
                self.sensitivity
                    .iter()
                    .zip(&noise.scales)
                    .map(|(d, s)| (d / s).powi(2))
                    .sum::<f64>()
                    .sqrt()
            } else {
                self.sensitivity[0] / min_scale(noise)
            }),
            _ => None,
        }
    }
}

fn min_scale(noise: &NoiseFamily) -> f64 {
    noise.scales.iter().copied().fold(f64::INFINITY, f64::min)
}

/// True iff the declared epsilon matches the composition rule for the noise
/// scales and sensitivities to within `1e-9` relative.
pub fn budget_check(noise: &NoiseFamily, budget: &PrivacyBudget) -> bool {
    match budget.implied_epsilon(noise) {
        Some(implied) => (implied - budget.epsilon).abs() <= BUDGET_TOLERANCE * implied.abs().max(budget.epsilon),
        None => false,
    }
}

/// A published statistic together with everything an analyst needs to
/// reason about it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivateRelease {
    pub task_id: String,
    pub n: u64,
    pub s_dp: Vec<f64>,
    pub noise: NoiseFamily,
    pub budget: PrivacyBudget,
}

impl PrivateRelease {
    pub fn dim(&self) -> usize {
        self.s_dp.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.noise.dim(), self.s_dp.len())?;
        if self.n == 0 {
            return Err(Error::param("release sample size must be positive"));
        }
        if !budget_check(&self.noise, &self.budget) {
            let implied = self.budget.implied_epsilon(&self.noise).unwrap_or(f64::NAN);
            return Err(Error::Budget {
                declared: self.budget.epsilon,
                implied,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: PrivateRelease = serde_json::from_str(s)?;
        r.validate()?;
        Ok(r)
    }
}

/// Privatize a confidential statistic.
pub fn release(
    rng: &mut RngHandle,
    t: &SummaryStatistic,
    noise: &NoiseFamily,
    budget: &PrivacyBudget,
) -> Result<PrivateRelease> {
    check_dim(noise.dim(), t.values.len())?;
    if !budget_check(noise, budget) {
        return Err(Error::Budget {
            declared: budget.epsilon,
            implied: budget.implied_epsilon(noise).unwrap_or(f64::NAN),
        });
    }
    let s_dp = t
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| v + noise.sample_coord(rng, j))
        .collect();
    Ok(PrivateRelease {
        task_id: t.task_id.clone(),
        n: t.n,
        s_dp,
        noise: noise.clone(),
        budget: budget.clone(),
    })
}

/// `log m(s_dp | t)`.
pub fn log_density(noise: &NoiseFamily, s_dp: &[f64], t: &[f64]) -> Result<f64> {
    check_dim(noise.dim(), s_dp.len())?;
    check_dim(noise.dim(), t.len())?;
    Ok(s_dp
        .iter()
        .zip(t)
        .enumerate()
        .map(|(j, (s, x))| noise.coord_log_density(j, s - x))
        .sum())
}
