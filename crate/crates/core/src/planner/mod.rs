//! Candidate generation, utility evaluation and the five planning strategies.

pub mod candidates;
pub mod trajectory;
pub mod utility;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::WindState;
use crate::error::Result;
use crate::geometry::{Point, Pose};
use crate::mapping::OccupancyGrid;
use crate::scenario::ScenarioConfig;

pub use candidates::candidate_paths;
pub use trajectory::{TimedPose, Trajectory};
pub use utility::{
    forward_simulate, tracking_utility, utility, weight_schedule, EntropySign, PlanningContext,
    TrackingForm, UtilityBreakdown, WeightSchedule,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    #[default]
    TreeSearch,
    RecedingHorizon,
    Greedy,
    Lawnmower,
    Random,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 5] = [
        PlannerKind::TreeSearch,
        PlannerKind::RecedingHorizon,
        PlannerKind::Greedy,
        PlannerKind::Lawnmower,
        PlannerKind::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PlannerKind::TreeSearch => "tree_search",
            PlannerKind::RecedingHorizon => "receding_horizon",
            PlannerKind::Greedy => "greedy",
            PlannerKind::Lawnmower => "lawnmower",
            PlannerKind::Random => "random",
        }
    }

    /// Whether the strategy looks at the map at all.
    pub fn is_adaptive(self) -> bool {
        !matches!(self, PlannerKind::Lawnmower | PlannerKind::Random)
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        PlannerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| format!("unknown planner `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub kind: PlannerKind,
    pub weight: WeightSchedule,
    pub tracking_form: TrackingForm,
    pub entropy_sign: EntropySign,
    /// Net heading change of each candidate, degrees.
    pub heading_changes_deg: Vec<f64>,
    /// Spacing of the predicted grids used by the tracking term.
    pub prediction_interval_s: f64,
    /// 1: score the fan; 2: score every fan-of-fans sequence.
    pub tree_depth: u8,
    /// Seconds the vehicle holds position after each replan.
    pub replan_stall_s: f64,
    /// Feasibility bound on candidate curvature, 1/m.
    pub max_curvature: f64,
    /// Lawnmower track spacing as a fraction of sensor range.
    pub lawnmower_spacing_factor: f64,
    /// Waypoints executed before a receding-horizon replan.
    pub receding_waypoints: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            kind: PlannerKind::TreeSearch,
            weight: WeightSchedule::default(),
            tracking_form: TrackingForm::Literal,
            entropy_sign: EntropySign::Reduction,
            heading_changes_deg: vec![-60.0, -40.0, -20.0, 0.0, 20.0, 40.0, 60.0],
            prediction_interval_s: 5.0,
            tree_depth: 1,
            replan_stall_s: 0.0,
            max_curvature: 0.5,
            lawnmower_spacing_factor: 0.8,
            receding_waypoints: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEval {
    pub index: usize,
    pub heading_change_deg: f64,
    pub utility: UtilityBreakdown,
}

/// Outcome of one replan.
#[derive(Debug, Clone)]
pub struct PlanDecision {
    pub trajectory: Trajectory,
    /// Empty for the non-adaptive planners.
    pub evaluations: Vec<CandidateEval>,
    pub chosen: Option<usize>,
    /// Wall-clock evaluation time, milliseconds.
    pub eval_ms: f64,
}

/// Index of the best evaluation: highest total, then smallest |heading
/// change|, then lowest index.
pub fn select_best(evals: &[CandidateEval]) -> Option<usize> {
    evals
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| {
            a.utility
                .total
                .partial_cmp(&b.utility.total)
                .unwrap_or(Ordering::Equal)
                .then_with(|| {
                    b.heading_change_deg
                        .abs()
                        .partial_cmp(&a.heading_change_deg.abs())
                        .unwrap_or(Ordering::Equal)
                })
                .then_with(|| b.index.cmp(&a.index))
        })
        .map(|(i, _)| i)
}

/// Plans from `pose`. `rng` is only consumed by the random planner.
pub fn plan<R: Rng + ?Sized>(
    grid: &OccupancyGrid,
    pose: &Pose,
    wind: &WindState,
    t_now: f64,
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<PlanDecision> {
    let started = Instant::now();
    let mut decision = match cfg.planner.kind {
        PlannerKind::TreeSearch => tree_search(grid, pose, wind, t_now, cfg)?,
        PlannerKind::RecedingHorizon => {
            let mut d = tree_search(grid, pose, wind, t_now, cfg)?;
            let k = cfg.planner.receding_waypoints.clamp(2, 5) - 1;
            if let Some(&s) = d.trajectory.waypoint_arc.get(k) {
                d.trajectory = d.trajectory.truncated(s);
            }
            d
        }
        PlannerKind::Greedy => greedy(grid, pose, wind, t_now, cfg)?,
        PlannerKind::Lawnmower => PlanDecision {
            trajectory: lawnmower(pose, cfg),
            evaluations: Vec::new(),
            chosen: None,
            eval_ms: 0.0,
        },
        PlannerKind::Random => PlanDecision {
            trajectory: random_path(pose, cfg, rng),
            evaluations: Vec::new(),
            chosen: None,
            eval_ms: 0.0,
        },
    };
    decision.eval_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(decision)
}

fn horizon_length(cfg: &ScenarioConfig) -> f64 {
    cfg.asv.speed * cfg.mission.planning_horizon_s
}

fn evals_from(cands: &[Trajectory], scores: Vec<UtilityBreakdown>) -> Vec<CandidateEval> {
    cands
        .iter()
        .zip(scores)
        .enumerate()
        .map(|(index, (t, utility))| CandidateEval {
            index,
            heading_change_deg: t.heading_change.to_degrees(),
            utility,
        })
        .collect()
}

fn finish(
    cands: Vec<Trajectory>,
    evals: Vec<CandidateEval>,
    fallback: &Pose,
    cfg: &ScenarioConfig,
) -> PlanDecision {
    let chosen = select_best(&evals);
    let trajectory = match chosen {
        Some(i) => cands[i].clone(),
        None => Trajectory::stationary(*fallback, cfg.asv.speed, cfg.mission.dt),
    };
    PlanDecision {
        trajectory,
        evaluations: evals,
        chosen,
        eval_ms: 0.0,
    }
}

fn tree_search(
    grid: &OccupancyGrid,
    pose: &Pose,
    wind: &WindState,
    t_now: f64,
    cfg: &ScenarioConfig,
) -> Result<PlanDecision> {
    let cands = candidate_paths(pose, cfg)?;
    let depth2 = cfg.planner.tree_depth >= 2;
    let max_h = if depth2 {
        2.0 * cfg.mission.planning_horizon_s
    } else {
        cfg.mission.planning_horizon_s
    };
    let ctx = PlanningContext::new(grid, wind, t_now, max_h, cfg)?;
    let scores: Vec<UtilityBreakdown> = if depth2 {
        cands
            .par_iter()
            .map(|first| best_sequence(&ctx, first, cfg))
            .collect::<Result<_>>()?
    } else {
        cands
            .par_iter()
            .map(|t| ctx.evaluate(t))
            .collect::<Result<_>>()?
    };
    let evals = evals_from(&cands, scores);
    Ok(finish(cands, evals, pose, cfg))
}

/// Best utility over all second-level continuations of `first`.
fn best_sequence(
    ctx: &PlanningContext<'_>,
    first: &Trajectory,
    cfg: &ScenarioConfig,
) -> Result<UtilityBreakdown> {
    let posterior = forward_simulate(ctx.grid, first, &ctx.wind, cfg);
    let end = first.end_pose();
    let seconds = candidate_paths(&end, cfg)?;
    let mut best: Option<UtilityBreakdown> = None;
    for second in &seconds {
        let u = ctx.evaluate_sequence(first, &posterior, second)?;
        if best.is_none_or(|b| u.total > b.total) {
            best = Some(u);
        }
    }
    match best {
        Some(b) => Ok(b),
        None => ctx.evaluate(first),
    }
}

fn greedy(
    grid: &OccupancyGrid,
    pose: &Pose,
    wind: &WindState,
    t_now: f64,
    cfg: &ScenarioConfig,
) -> Result<PlanDecision> {
    let cands = candidate_paths(pose, cfg)?;
    let ctx = PlanningContext::new(grid, wind, t_now, 0.0, cfg)?;
    let scores: Vec<UtilityBreakdown> = cands
        .par_iter()
        .map(|t| ctx.evaluate_final_pose(t))
        .collect::<Result<_>>()?;
    let evals = evals_from(&cands, scores);
    Ok(finish(cands, evals, pose, cfg))
}

/// Horizontal boustrophedon tracks, spaced `factor · max_range` apart and
/// inset by half a spacing from the map edges.
pub fn lawnmower_tracks(cfg: &ScenarioConfig) -> Vec<(Point, Point)> {
    let b = candidates::inset_bounds(cfg);
    let spacing = cfg.planner.lawnmower_spacing_factor * cfg.sensor.max_range;
    let inset = (spacing / 2.0).min(b.width / 2.0).min(b.height / 2.0);
    let (x_lo, x_hi) = (b.x0 + inset, b.x0 + b.width - inset);
    let y_top = b.y0 + b.height;
    let mut tracks = Vec::new();
    let mut y = b.y0 + inset;
    let mut leftwards = false;
    while y <= y_top + 1e-9 {
        let (a, c) = if leftwards {
            (x_hi, x_lo)
        } else {
            (x_lo, x_hi)
        };
        tracks.push((Point::new(a, y.min(y_top)), Point::new(c, y.min(y_top))));
        leftwards = !leftwards;
        y += spacing;
    }
    tracks
}

/// Open-loop coverage path from `pose`: transit to the nearest track corner,
/// then sweep the tracks back and forth until the mission budget is covered.
pub fn lawnmower(pose: &Pose, cfg: &ScenarioConfig) -> Trajectory {
    let tracks = lawnmower_tracks(cfg);
    let mut sweep: Vec<Point> = tracks.iter().flat_map(|&(a, b)| [a, b]).collect();
    let start = pose.position();
    let corners = [
        sweep[0],
        sweep[1],
        sweep[sweep.len() - 2],
        sweep[sweep.len() - 1],
    ];
    let nearest = corners
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            a.distance(start)
                .partial_cmp(&b.distance(start))
                .unwrap_or(Ordering::Equal)
        })
        .map(|(i, _)| i)
        .unwrap_or(0);
    if nearest >= 2 {
        sweep.reverse();
    }
    if nearest % 2 == 1 {
        // enter each track from the other end
        for pair in sweep.chunks_mut(2) {
            pair.swap(0, 1);
        }
    }
    let needed = cfg.asv.speed * (cfg.mission.budget_s + cfg.mission.dt) + 1.0;
    let mut points = vec![start];
    let mut length = 0.0;
    let mut forward = sweep.clone();
    while length < needed {
        for &p in &forward {
            length += points.last().map_or(0.0, |q: &Point| q.distance(p));
            points.push(p);
        }
        forward.reverse();
    }
    points.dedup_by(|a, b| a.distance(*b) < 1e-12);
    Trajectory::polyline(&points, pose.psi, cfg.asv.speed, cfg.mission.dt)
}

/// Bézier-smoothed path to a waypoint drawn uniformly from the reachable
/// disk (radius speed · horizon) intersected with the map.
pub fn random_path<R: Rng + ?Sized>(pose: &Pose, cfg: &ScenarioConfig, rng: &mut R) -> Trajectory {
    let bounds = candidates::inset_bounds(cfg);
    let radius = horizon_length(cfg);
    let start = pose.position();
    let mut goal = None;
    for _ in 0..64 {
        let r = radius * rng.random::<f64>().sqrt();
        let th = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let p = Point::new(start.x + r * th.cos(), start.y + r * th.sin());
        if bounds.contains(p) && p.distance(start) > 1e-6 {
            goal = Some(p);
            break;
        }
    }
    let goal = goal.unwrap_or_else(|| bounds.center());
    if goal.distance(start) < 1e-9 {
        return Trajectory::stationary(*pose, cfg.asv.speed, cfg.mission.dt);
    }
    // quadratic blend leaving along the current heading
    let d = start.distance(goal);
    let ctrl = Point::new(
        start.x + 0.5 * d * pose.psi.cos(),
        start.y + 0.5 * d * pose.psi.sin(),
    );
    let way: [Point; 5] = std::array::from_fn(|k| {
        let u = k as f64 / 4.0;
        let v = 1.0 - u;
        Point::new(
            v * v * start.x + 2.0 * u * v * ctrl.x + u * u * goal.x,
            v * v * start.y + 2.0 * u * v * ctrl.y + u * u * goal.y,
        )
    });
    let change = crate::geometry::wrap_angle((goal.y - ctrl.y).atan2(goal.x - ctrl.x) - pose.psi);
    Trajectory::bezier(way, pose.psi, cfg.asv.speed, cfg.mission.dt, change).clipped_to(&bounds)
}
