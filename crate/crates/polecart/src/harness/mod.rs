//! Config-driven experiment runner: seeded runs, CSV metrics, SVG plots,
//! and run-to-run comparisons.

pub mod compare;
pub mod config;
pub mod csv;
pub mod run;
pub mod svg;

pub use compare::{compare_runs, ComparisonReport};
pub use config::{AlgorithmKind, ExperimentConfig};
pub use csv::{read_run_csv, write_outputs, write_run_csv, CSV_HEADER};
pub use run::{
    execute_to_dir, load_run_dir, run_experiment, run_experiment_sequential, run_single,
};
pub use svg::emit_plot;
