//! Experiment runner behind the `arwp` binary.
//!
//! Configs are TOML. A run writes `metrics.csv`, particle snapshots,
//! `metadata.toml` and a plotting script into its output directory.

pub mod config;
pub mod error;
pub mod experiment;
pub mod plot;
pub mod presets;
pub mod sweep;
pub mod theory;

pub use config::{ExperimentConfig, SweepConfig, TheoryConfig};
pub use error::{CliError, Result};
pub use experiment::{run_experiment, write_report, ExperimentReport, MetricRow};
pub use sweep::{phase_sweep, write_sweep, SweepCell};
pub use theory::{theory_report, write_theory, TheoryRow};
