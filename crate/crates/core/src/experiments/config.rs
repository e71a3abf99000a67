//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::baselines::DaMcmcConfig;
use crate::constraints::CountSupport;
use crate::error::{Error, Result};
use crate::imputation::ImputationOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    BoundedMean,
    LinregSsp,
    CountyLinear,
    CountyLogistic,
}

impl Design {
    pub fn task_id(self) -> &'static str {
        match self {
            Design::BoundedMean => crate::models::bounded_mean::TASK_ID,
            Design::LinregSsp => crate::models::linreg::TASK_ID,
            Design::CountyLinear => crate::models::county::LINEAR_TASK_ID,
            Design::CountyLogistic => crate::models::county::LOGISTIC_TASK_ID,
        }
    }

    pub fn is_county(self) -> bool {
        matches!(self, Design::CountyLinear | Design::CountyLogistic)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    WangOracle,
    WangPlugin,
    Naive,
    DaMcmc,
    PumbaDraws,
    PumbaMeancov,
    NonDp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::WangOracle => "wang_oracle",
            Method::WangPlugin => "wang_plugin",
            Method::Naive => "naive",
            Method::DaMcmc => "da_mcmc",
            Method::PumbaDraws => "pumba_draws",
            Method::PumbaMeancov => "pumba_meancov",
            Method::NonDp => "non_dp",
        }
    }

    pub fn supports(self, design: Design) -> bool {
        match self {
            Method::WangOracle | Method::WangPlugin => design == Design::BoundedMean,
            Method::DaMcmc => design == Design::LinregSsp,
            _ => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// Only the intercept is non-zero.
    Null,
    /// The full coefficient vector.
    Alternative,
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<u64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(u64),
        Many(Vec<u64>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Sample sizes; one table block per value. Ignored by county designs.
    #[serde(deserialize_with = "one_or_many")]
    pub n: Vec<u64>,
    /// Beta shape parameters of the bounded-mean data.
    pub beta_a: f64,
    pub beta_b: f64,
    /// Regression intercept and slope.
    pub beta0: f64,
    pub beta1: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            n: vec![1000],
            beta_a: 2.0,
            beta_b: 4.0,
            beta0: 0.25,
            beta1: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrivacyConfig {
    /// Bounded mean: the split `[eps1, eps2]` over the two sums. Other
    /// designs: a single total budget.
    pub epsilon: Vec<f64>,
}

impl Default for PrivacyConfig {
    fn default() -> Self {
        Self { epsilon: vec![1.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountyConfig {
    pub counties: usize,
    pub pop_min: f64,
    pub pop_max: f64,
    pub support: CountSupport,
    pub hypothesis: Hypothesis,
    /// Overrides the built-in coefficients for the chosen hypothesis.
    pub coefficients: Option<Vec<f64>>,
    /// Standard deviation of an extra county-level error added to the
    /// homeownership rate in the linear design. Zero leaves binomial
    /// sampling as the only source of residual variation.
    pub noise_sd: f64,
    /// Joint L2 sensitivity of one county's released counts.
    pub sensitivity: f64,
}

impl Default for CountyConfig {
    fn default() -> Self {
        Self {
            counties: 300,
            pop_min: 1e3,
            pop_max: 1e6,
            support: CountSupport::Continuous,
            hypothesis: Hypothesis::Null,
            coefficients: None,
            noise_sd: 0.0,
            sensitivity: 8f64.sqrt(),
        }
    }
}

/// Coefficients used to generate linear-design counties under the
/// alternative.
pub const LINEAR_ALTERNATIVE: [f64; 10] = [0.738, -0.120, -1.030, -0.108, -0.115, -0.095, -0.402, -0.040, 0.030, -8.17e-6];

/// Coefficients used to generate logistic-design counties under the
/// alternative.
pub const LOGISTIC_ALTERNATIVE: [f64; 10] = [1.119, -0.925, -2.631, 0.021, -1.491, -0.692, -2.934, -0.131, 0.111, -2.376e-5];

impl CountyConfig {
    pub fn true_coefficients(&self, design: Design) -> Result<Vec<f64>> {
        if let Some(c) = &self.coefficients {
            if c.len() != 10 {
                return Err(Error::Config(format!("county coefficients need 10 entries, got {}", c.len())));
            }
            return Ok(c.clone());
        }
        let full = match design {
            Design::CountyLinear => LINEAR_ALTERNATIVE,
            Design::CountyLogistic => LOGISTIC_ALTERNATIVE,
            _ => return Err(Error::Config("not a county design".into())),
        };
        Ok(match self.hypothesis {
            Hypothesis::Alternative => full.to_vec(),
            Hypothesis::Null => {
                let mut v = vec![0.0; 10];
                v[0] = full[0];
                v
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    #[default]
    Csv,
    Markdown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub design: Design,
    pub replicates: usize,
    /// Imputations per replicate for the posterior methods.
    pub draws: usize,
    pub level: f64,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub output: Option<PathBuf>,
    pub format: TableFormat,
    pub data: DataConfig,
    pub privacy: PrivacyConfig,
    pub county: CountyConfig,
    pub da_mcmc: DaMcmcConfig,
    pub imputation: ImputationOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            design: Design::BoundedMean,
            replicates: 100,
            draws: crate::pumba::DEFAULT_DRAWS,
            level: 0.95,
            seed: 1,
            methods: vec![Method::PumbaDraws],
            output: None,
            format: TableFormat::Csv,
            data: DataConfig::default(),
            privacy: PrivacyConfig::default(),
            county: CountyConfig::default(),
            da_mcmc: DaMcmcConfig::default(),
            imputation: ImputationOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.draws < 2 {
            return Err(Error::Config("draws must be at least 2".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if let Some(m) = self.methods.iter().find(|m| !m.supports(self.design)) {
            return Err(Error::Config(format!("method {} does not apply to design {:?}", m.name(), self.design)));
        }
        let eps = &self.privacy.epsilon;
        let want = if self.design == Design::BoundedMean { 2 } else { 1 };
        if eps.len() != want {
            return Err(Error::Config(format!("design {:?} needs {want} epsilon value(s), got {}", self.design, eps.len())));
        }
        if eps.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(Error::Config("epsilon values must be positive".into()));
        }
        if self.design.is_county() {
            let c = &self.county;
            if c.counties < 20 {
                return Err(Error::Config("county designs need at least 20 counties".into()));
            }
            if !(c.pop_min >= 1.0 && c.pop_min <= c.pop_max) {
                return Err(Error::Config("county populations need 1 <= pop_min <= pop_max".into()));
            }
            if !(c.noise_sd >= 0.0) || !(c.sensitivity > 0.0) {
                return Err(Error::Config("county noise_sd must be non-negative and sensitivity positive".into()));
            }
            c.true_coefficients(self.design)?;
        } else {
            if self.data.n.is_empty() {
                return Err(Error::Config("data.n must list at least one sample size".into()));
            }
            let min_n = if self.design == Design::LinregSsp { 3 } else { 2 };
            if self.data.n.iter().any(|&n| n < min_n) {
                return Err(Error::Config(format!("sample sizes must be at least {min_n}")));
            }
        }
        if self.methods.contains(&Method::DaMcmc) {
            self.da_mcmc.validate()?;
        }
        Ok(())
    }
}
