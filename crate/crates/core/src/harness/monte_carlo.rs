//! Seeded Monte-Carlo sweeps over independent episodes.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{aggregate, Summary};
use crate::rng::{substream, Stream};
use crate::scenario::ScenarioConfig;

use super::episode::{run_episode_with, EpisodeOptions, EpisodeTrace};

#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    pub summary: Summary,
    /// Ordered by seed.
    pub traces: Vec<EpisodeTrace>,
}

/// The configuration actually run for trial `seed`: mean wind speed drawn
/// uniformly from the sweep range and, optionally, a uniform direction.
pub fn trial_config(base: &ScenarioConfig, seed: u64) -> ScenarioConfig {
    let mut cfg = base.clone();
    let mut rng = substream(seed, Stream::Scenario);
    let (lo, hi) = (base.sweep.mean_speed_min, base.sweep.mean_speed_max);
    let u: f64 = rng.random();
    cfg.wind.mean_speed = lo + u * (hi - lo);
    let d: f64 = rng.random();
    if base.sweep.randomize_direction {
        cfg.wind.mean_dir = crate::geometry::wrap_angle((2.0 * d - 1.0) * std::f64::consts::PI);
    }
    cfg
}

pub fn run_trial(base: &ScenarioConfig, seed: u64, opts: &EpisodeOptions) -> Result<EpisodeTrace> {
    run_episode_with(&trial_config(base, seed), seed, opts).map_err(|e| Error::Trial {
        seed,
        source: Box::new(e),
    })
}

/// Runs seeds `seed0 .. seed0 + n_trials` on up to `workers` threads
/// (0 = one per core). Results do not depend on the worker count.
pub fn run_monte_carlo(
    cfg: &ScenarioConfig,
    n_trials: usize,
    seed0: u64,
    workers: usize,
    opts: &EpisodeOptions,
) -> Result<MonteCarloResult> {
    if n_trials == 0 {
        return Err(Error::Empty("trials"));
    }
    let seeds: Vec<u64> = (0..n_trials as u64).map(|k| seed0 + k).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::ConfigParse(format!("thread pool: {e}")))?;
    let results: Vec<Result<EpisodeTrace>> =
        pool.install(|| seeds.par_iter().map(|&s| run_trial(cfg, s, opts)).collect());
    // first failing seed in seed order, whatever finished first
    let traces = results.into_iter().collect::<Result<Vec<_>>>()?;
    let series: Vec<_> = traces.iter().map(|t| t.metrics()).collect();
    Ok(MonteCarloResult {
        summary: aggregate(&series)?,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_wind_in_range() {
        let cfg = ScenarioConfig::default();
        for s in 0..50 {
            let t = trial_config(&cfg, s);
            assert!((6.0..=10.0).contains(&t.wind.mean_speed));
        }
        assert_eq!(trial_config(&cfg, 3), trial_config(&cfg, 3));
    }

    #[test]
    fn single_trial_summary_has_zero_std() {
        let mut cfg = ScenarioConfig::default();
        cfg.mission.budget_s = 20.0;
        cfg.mission.planning_horizon_s = 10.0;
        let r = run_monte_carlo(&cfg, 1, 9, 1, &EpisodeOptions::default()).unwrap();
        let last = r.traces[0].final_metrics().unwrap();
        assert_eq!(r.summary.final_entropy.mean, last.entropy);
        assert_eq!(r.summary.final_entropy.std, 0.0);
    }
}
