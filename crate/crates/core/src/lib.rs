//! Approximate Bayesian inference for statistics released through additive
//! privacy mechanisms.
//!
//! The pipeline has two stages. A confidential sum statistic is first
//! imputed from the privatized release by sampling the mechanism density
//! restricted to the statistic's feasible support
//! ([`imputation`]). Each imputed statistic is then pushed through a
//! large-sample normal approximation of the non-private posterior
//! ([`models`]), either by drawing parameters ([`pumba::pumba_draws`]) or by
//! aggregating estimator means and covariances ([`pumba::pumba_meancov`]).
//!
//! Comparison methods live in [`baselines`], and [`experiments`] holds the
//! replicated simulation harness used to measure coverage, width, RMSE and
//! sampling throughput.

pub mod baselines;
pub mod constraints;
pub mod error;
pub mod experiments;
pub mod imputation;
pub mod linalg;
pub mod mechanisms;
pub mod models;
pub mod pumba;
pub mod rng;
pub mod sampling;
pub mod stats;

pub use constraints::ConstraintSet;
pub use error::{Error, Result};
pub use imputation::{ImputationMethod, ImputationOptions, ImputationReport};
pub use linalg::DenseMatrix;
pub use mechanisms::{NoiseFamily, NoiseKind, PrivacyBudget, PrivacyRegime, PrivateRelease};
pub use models::{EstimateWithCovariance, RawData, SummaryStatistic, TaskModel};
pub use pumba::{PosteriorMode, PosteriorSummary};
pub use rng::RngHandle;
