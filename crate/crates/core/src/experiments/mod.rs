//! Simulation studies: configuration, data generation, the replicate
//! harness and result tables.

pub mod config;
pub mod datagen;
pub mod harness;
pub mod metrics;
pub mod presets;

pub use config::{Design, ExperimentConfig, Hypothesis, Method, TableFormat};
pub use harness::{run_experiment, run_replicate, run_replicates, summarize, ExperimentRun};
pub use metrics::{emit_table, MethodOutcome, MetricsRow, MetricsTable};
pub use presets::preset;
