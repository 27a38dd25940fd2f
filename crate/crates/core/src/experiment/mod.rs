//! The three-way case study and the run configuration behind the CLI.

mod case_study;
mod config;
mod metrics;
mod plot;

pub use case_study::{
    run_case_study, run_seed, run_training, summary_csv, write_outputs, CurveSummary, Method, RunOutcome, SeedRun,
    SPEED_FRACTION, SUMMARY_HEADER,
};
pub use config::{known_keys, resolve_config, validate_config, Command, Profile, RunConfig, TaskKind};
pub use metrics::{converged_reward, epochs_to_fraction, fraction_level, median, CONVERGED_TAIL, TRAILING_WINDOW};
pub use plot::{line_chart_svg, plot_training_logs, read_training_csv, Curve, Series};
