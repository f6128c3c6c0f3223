//! One closed-loop mission: sense, estimate, predict, plan, act.

use serde::{Deserialize, Serialize};

use crate::environment::{step_targets, step_wind, TargetState, WindState};
use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::mapping::{
    mean_entropy, update_estimation, update_prediction, OccupancyGrid, PredictionParams,
};
use crate::metrics::{mse, GroundTruthGrid, MetricSample};
use crate::perception::{simulate_detections, Detection};
use crate::planner::{plan, PlanDecision, PlannerKind, Trajectory};
use crate::rng::{substream, Stream};
use crate::scenario::{build_world, ScenarioConfig};

use super::trace;

const TIME_EPS: f64 = 1e-9;

/// State after one `dt` step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Mission clock at the end of the step.
    pub t: f64,
    /// Vehicle pose at the end of the step.
    pub asv: Pose,
    pub wind: WindState,
    pub targets: Vec<TargetState>,
    /// Detections made at the start of the step.
    pub detections: Vec<Detection>,
    pub metrics: MetricSample,
    pub replanned: bool,
}

/// Map probabilities at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub nx: usize,
    pub ny: usize,
    pub probabilities: Vec<f64>,
}

/// One candidate score of one replan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerLogRow {
    pub replan: usize,
    pub t: f64,
    pub candidate: usize,
    pub heading_change_deg: f64,
    pub entropy_term: f64,
    pub tracking_term: f64,
    pub w: f64,
    pub total: f64,
    pub chosen: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub config_hash: String,
    pub seed: u64,
    pub planner: PlannerKind,
    pub nx: usize,
    pub ny: usize,
    pub steps: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub planner_log: Vec<PlannerLogRow>,
    pub replans: usize,
    /// Wall-clock time per replan, ms. Not part of the trace identity.
    #[serde(skip)]
    pub eval_ms: Vec<f64>,
}

impl PartialEq for EpisodeTrace {
    fn eq(&self, other: &Self) -> bool {
        self.config_hash == other.config_hash
            && self.seed == other.seed
            && self.planner == other.planner
            && self.nx == other.nx
            && self.ny == other.ny
            && self.steps == other.steps
            && self.snapshots == other.snapshots
            && self.planner_log == other.planner_log
            && self.replans == other.replans
    }
}

impl EpisodeTrace {
    /// SHA-256 of the serialized trace, hex.
    pub fn checksum(&self) -> String {
        trace::checksum(self)
    }

    pub fn metrics(&self) -> Vec<MetricSample> {
        self.steps.iter().map(|s| s.metrics).collect()
    }

    pub fn final_metrics(&self) -> Option<MetricSample> {
        self.steps.last().map(|s| s.metrics)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeOptions {
    /// Store a map snapshot whenever the clock reaches a multiple of this.
    pub snapshot_every_s: Option<f64>,
}

pub fn run_episode(cfg: &ScenarioConfig, seed: u64) -> Result<EpisodeTrace> {
    run_episode_with(cfg, seed, &EpisodeOptions::default())
}

fn step_err(step: usize, t: f64) -> impl FnOnce(Error) -> Error {
    move |e| Error::Step {
        step,
        t,
        source: Box::new(e),
    }
}

pub fn run_episode_with(
    cfg: &ScenarioConfig,
    seed: u64,
    opts: &EpisodeOptions,
) -> Result<EpisodeTrace> {
    let mut world = build_world(cfg, seed)?;
    let mut grid = OccupancyGrid::from_config(cfg);
    let geo = grid.geometry;
    let pred = PredictionParams::from_config(cfg);
    let dt = cfg.mission.dt;
    let budget = cfg.mission.budget_s;
    let n_steps = (budget / dt - TIME_EPS).ceil() as usize;
    let stall_steps = (cfg.planner.replan_stall_s / dt - TIME_EPS).ceil().max(0.0) as usize;

    let mut wind_rng = substream(seed, Stream::Wind);
    let mut target_rng = substream(seed, Stream::Targets);
    let mut sense_rng = substream(seed, Stream::Perception);
    let mut plan_rng = substream(seed, Stream::Planner);

    let mut trace = EpisodeTrace {
        config_hash: cfg.hash(),
        seed,
        planner: cfg.planner.kind,
        nx: geo.nx,
        ny: geo.ny,
        steps: Vec::with_capacity(n_steps),
        snapshots: Vec::new(),
        planner_log: Vec::new(),
        replans: 0,
        eval_ms: Vec::new(),
    };

    let mut current: Option<Trajectory> = None;
    let mut elapsed = 0.0;
    let mut hold = 0usize;
    let mut total_detections = 0usize;

    for step in 0..n_steps {
        let t = world.clock_s;
        let ctx = step_err(step, t);

        let detections =
            simulate_detections(&world.targets, &world.asv, &cfg.sensor, &mut sense_rng);
        if let Err(e) = update_estimation(&mut grid, &detections, &world.asv, &cfg.sensor) {
            return Err(ctx(e));
        }
        if cfg.mapping.prediction_step {
            update_prediction(&mut grid, &world.wind, dt, &pred);
        }

        let done = current.as_ref().is_none_or(|traj| traj.pose_at(elapsed).1);
        let may_replan = current.is_none() || cfg.planner.kind != PlannerKind::Lawnmower;
        let mut replanned = false;
        if done && may_replan && hold == 0 {
            let decision = match plan(&grid, &world.asv, &world.wind, t, cfg, &mut plan_rng) {
                Ok(d) => d,
                Err(e) => return Err(ctx(e)),
            };
            log_decision(&mut trace, &decision, t);
            current = Some(decision.trajectory);
            elapsed = 0.0;
            hold = stall_steps;
            replanned = true;
        }

        let wind_now = world.wind;
        step_targets(
            &mut world.targets,
            &wind_now,
            cfg.wind.gamma,
            cfg.targets.process_noise_std,
            dt,
            &mut target_rng,
        );
        world.wind = step_wind(&wind_now, &cfg.wind, dt, &mut wind_rng);
        if hold > 0 {
            hold -= 1;
        } else if let Some(traj) = &current {
            elapsed += dt;
            world.asv = traj.pose_at(elapsed).0;
        }
        world.clock_s = (step + 1) as f64 * dt;

        total_detections += detections.len();
        let truth = GroundTruthGrid::from_targets(geo, &world.targets);
        let err = mse(&grid, &truth, cfg.metrics.sigma_g, cfg.metrics.truncate)
            .map_err(step_err(step, t))?;
        let metrics = MetricSample {
            t: world.clock_s,
            entropy: mean_entropy(&grid),
            mse: err,
            n_detections_step: detections.len(),
            mean_detections: total_detections as f64 / (step + 1) as f64,
        };
        if let Some(every) = opts.snapshot_every_s.filter(|e| *e > 0.0) {
            let k = (world.clock_s / every).round();
            if (k * every - world.clock_s).abs() < TIME_EPS {
                trace.snapshots.push(Snapshot {
                    t: world.clock_s,
                    nx: geo.nx,
                    ny: geo.ny,
                    probabilities: grid.probabilities(),
                });
            }
        }
        trace.steps.push(StepRecord {
            step,
            t: world.clock_s,
            asv: world.asv,
            wind: world.wind,
            targets: world.targets.clone(),
            detections,
            metrics,
            replanned,
        });
    }
    Ok(trace)
}

fn log_decision(trace: &mut EpisodeTrace, d: &PlanDecision, t: f64) {
    let replan = trace.replans;
    for e in &d.evaluations {
        trace.planner_log.push(PlannerLogRow {
            replan,
            t,
            candidate: e.index,
            heading_change_deg: e.heading_change_deg,
            entropy_term: e.utility.entropy_term,
            tracking_term: e.utility.tracking_term,
            w: e.utility.w,
            total: e.utility.total,
            chosen: d.chosen == Some(e.index),
        });
    }
    trace.eval_ms.push(d.eval_ms);
    trace.replans += 1;
}
