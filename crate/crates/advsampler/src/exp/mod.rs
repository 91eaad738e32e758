//! Config-driven experiment runner: parsing, per-mode defaults, seeding,
//! orchestration, and artifact emission.

mod config;
mod output;
mod runner;

pub use config::{
    config_from_value, default_config_value, merge_defaults, parse_config, ExperimentConfig, Mode,
};
pub use output::{
    read_samples, write_grid_pmf, write_manifest, write_metric_rows, write_return_rows,
    write_samples, RunStatus,
};
pub use runner::{run, run_single, RunOutcome};
