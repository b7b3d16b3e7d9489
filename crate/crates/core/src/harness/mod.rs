//! Experiment harness: TOML configs, training runs, κ sweeps, certification
//! and plots.

mod config;
mod plot;
mod run;
mod sweep;
mod verify;

pub use config::{
    load_config, EnvironmentConfig, ExperimentConfig, GraphConfig, JobBalancingConfig, KappaSpec, RandomMpgConfig,
    SensorCoverageConfig,
};
pub use plot::emit_plots;
pub use run::{
    build_model, run_experiment, train_options, write_convergence_csv, BuiltModel, RunArtifacts, CONVERGENCE_CSV,
    SNAPSHOT, SUMMARY,
};
pub use sweep::{median, relative_error_pct, sweep_kappa, terminal_return, SweepRow, EPSILON_CSV, REPLICATES_CSV};
pub use verify::{
    verify, verify_model, CertificationReport, VerifyOptions, CERTIFICATION, DECAY, EPSILON_NASH, FULL_INFORMATION,
    GRADIENT_STEP, MONOTONE, MONOTONICITY_TOL, NASH_SLACK, REQUIRED, TRUNCATED_Q,
};
