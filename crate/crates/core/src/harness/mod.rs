//! Experiment configuration, drivers and result files.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{GeometryPreset, RunMode, SimConfig};
pub use experiments::{
    run_ber_experiment, run_outage_experiment, run_selection_accuracy, run_si_sweep, throughput,
};
pub use output::{emit_results, parse_csv, render_csv, ResultRow};
