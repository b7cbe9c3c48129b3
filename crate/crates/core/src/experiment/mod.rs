//! Configuration-driven Monte Carlo experiments: sweeps over surface size,
//! phase resolution, power ratio and user split, single-user rate maps, and
//! the verifier table.

mod config;
mod runner;
mod scenario;
pub mod stats;
mod verify;

pub use config::{
    ChannelConfig, ExperimentConfig, HeatmapConfig, OptimizerConfig, Power, RunConfig, ScenarioConfig, SurfaceConfig,
    SweepConfig, VerifyConfig,
};
pub use runner::{
    fingerprint, heatmap, run_single, run_sweep, run_trial, sweep_bits, sweep_epsilon, sweep_size, sweep_user_split,
    write_heatmap_csv, HeatmapCell, SingleReport, SweepAxis, SweepOptions, SweepResult, SweepRow, TrialOutcome,
    UserReport,
};
pub use scenario::{
    build_instance, optimizer_options, place_users, sbs_positions, surface_spec, trial_rng, TrialDraw, Variant,
    IRS_EPSILON,
};
pub use verify::{format_checks, verify};
