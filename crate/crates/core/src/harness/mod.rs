//! Episode loop, Monte-Carlo sweeps, trace files and output bundles.

pub mod episode;
pub mod monte_carlo;
pub mod output;
pub mod trace;

pub use episode::{
    run_episode, run_episode_with, EpisodeOptions, EpisodeTrace, PlannerLogRow, Snapshot,
    StepRecord,
};
pub use monte_carlo::{run_monte_carlo, run_trial, trial_config, MonteCarloResult};
pub use trace::{replay, TraceError};
