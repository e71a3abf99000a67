//! Comparison methods: convolution intervals for a bounded mean, plug-in
//! regression on noisy sums, and a data-augmentation MCMC sampler for the
//! regression task.

pub mod da_mcmc;
pub mod naive;
pub mod wang;

pub use da_mcmc::{da_mcmc, DaMcmcConfig, McmcOutput};
pub use naive::{naive_regression, NaiveFit};
pub use wang::{convolution_quantile, wang_known_variance_interval, wang_plugin_interval};
