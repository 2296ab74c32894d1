//! Reproducible experiments wiring the library together, as used by the CLI.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{Cell, Experiment, ExperimentConfig, Settings};
pub use experiments::{
    run_bound_search, run_coupling_verify, run_fit_sweep, run_kc_probe, run_table1, BoundReport, CouplingRun,
    DistortionRow, DistortionSummary, FitSweepReport, KcRow, Table1Report,
};
