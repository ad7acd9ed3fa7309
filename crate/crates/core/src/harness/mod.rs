//! Experiment orchestration: configuration, end-to-end runs, fixture replays,
//! exhaustive verification and graph export.

pub mod brute;
pub mod config;
pub mod dag;
pub mod replay_verify;
pub mod runner;

pub use brute::{brute_force_optimum, BruteResult};
pub use config::RunConfig;
pub use dag::{export_dag, graph_from_trace};
pub use replay_verify::{replay_verify, FixtureSet, ReplayReport};
pub use runner::{
    run_experiment, run_phase1_only, run_phase2_only, Experiment, PhaseSummary, RunSummary,
};
