//! The planning utility: map-entropy reduction from a forward-simulated
//! mapper plus a weighted target-tracking reward computed on predicted
//! target heatmaps.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::environment::WindState;
use crate::error::{Error, Result};
use crate::geometry::{Point, Pose};
use crate::mapping::{mean_entropy, update_prediction, OccupancyGrid, PredictionParams};
use crate::perception::SensorModelParams;
use crate::predictor::{binarize, predict_from_centroids, PredictedGrid};
use crate::scenario::ScenarioConfig;

use super::trajectory::{TimedPose, Trajectory};

/// Tracking weight over the mission. Serialized as its display form
/// (`2`, `decay(5)`), so configs read naturally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightRepr", into = "WeightRepr")]
pub enum WeightSchedule {
    Constant {
        w: f64,
    },
    /// `w0 · (1 − t/B)`.
    LinearDecay {
        w0: f64,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WeightRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<WeightRepr> for WeightSchedule {
    type Error = String;

    fn try_from(r: WeightRepr) -> std::result::Result<Self, String> {
        match r {
            WeightRepr::Number(w) => Ok(WeightSchedule::Constant { w }),
            WeightRepr::Text(s) => s.parse(),
        }
    }
}

impl From<WeightSchedule> for WeightRepr {
    fn from(w: WeightSchedule) -> Self {
        match w {
            WeightSchedule::Constant { w } => WeightRepr::Number(w),
            other => WeightRepr::Text(other.to_string()),
        }
    }
}

impl Default for WeightSchedule {
    fn default() -> Self {
        WeightSchedule::LinearDecay { w0: 5.0 }
    }
}

impl fmt::Display for WeightSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSchedule::Constant { w } => write!(f, "{w}"),
            WeightSchedule::LinearDecay { w0 } => write!(f, "decay({w0})"),
        }
    }
}

impl FromStr for WeightSchedule {
    type Err = String;

    /// Accepts `2`, `decay(5)` or `5(1-t/B)`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if let Some(inner) = compact
            .strip_prefix("decay(")
            .and_then(|r| r.strip_suffix(')'))
        {
            let w0 = inner
                .parse()
                .map_err(|_| format!("bad decay weight `{s}`"))?;
            return Ok(WeightSchedule::LinearDecay { w0 });
        }
        if let Some(w0) = compact.strip_suffix("(1-t/B)") {
            let w0 = w0.parse().map_err(|_| format!("bad decay weight `{s}`"))?;
            return Ok(WeightSchedule::LinearDecay { w0 });
        }
        compact
            .parse()
            .map(|w| WeightSchedule::Constant { w })
            .map_err(|_| format!("bad weight schedule `{s}`"))
    }
}

/// Tracking weight at mission time `t_now` for budget `budget_s`.
pub fn weight_schedule(mode: &WeightSchedule, t_now: f64, budget_s: f64) -> f64 {
    match *mode {
        WeightSchedule::Constant { w } => w,
        WeightSchedule::LinearDecay { w0 } => w0 * (1.0 - t_now / budget_s),
    }
}

/// Per-cell tracking reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrackingForm {
    /// `e^(−2p)`, the literal reward.
    #[default]
    Literal,
    /// `1 − e^(−2p)`: rewards fov coverage of predicted target mass.
    Complementary,
}

impl TrackingForm {
    #[inline]
    pub fn reward(self, p: f64) -> f64 {
        match self {
            TrackingForm::Literal => (-2.0 * p).exp(),
            TrackingForm::Complementary => 1.0 - (-2.0 * p).exp(),
        }
    }
}

/// Sign of the entropy term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EntropySign {
    /// prior − posterior (positive for informative paths).
    #[default]
    Reduction,
    /// posterior − prior.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UtilityBreakdown {
    pub entropy_term: f64,
    pub tracking_term: f64,
    pub w: f64,
    pub total: f64,
}

impl UtilityBreakdown {
    pub fn new(entropy_term: f64, tracking_term: f64, w: f64) -> Self {
        Self {
            entropy_term,
            tracking_term,
            w,
            total: entropy_term + w * tracking_term,
        }
    }
}

/// Most-likely measurement from `pose`: fov cells believed occupied are
/// re-detected, all others are observed free.
pub fn expected_measurement_update(
    grid: &mut OccupancyGrid,
    pose: &Pose,
    params: &SensorModelParams,
) {
    let geo = grid.geometry;
    let cells = geo.fov_cells(pose, params);
    let origin = pose.position();
    // Both models are logistic in r, so their log-odds are linear in r.
    for &idx in &cells {
        let (ix, iy) = geo.coords(idx);
        let r = geo.cell_center(ix, iy).distance(origin);
        let delta = if grid.probability_at(idx) > 0.5 {
            -params.a * (r - params.d)
        } else {
            -params.a_prime * (r - params.d_prime)
        };
        grid.add_log_odds(idx, delta);
    }
    grid.clamp_cells(cells);
}

/// Runs the mapper along `traj` on a copy of `snapshot` with frozen wind and
/// expected measurements. The input is never modified.
pub fn forward_simulate(
    snapshot: &OccupancyGrid,
    traj: &Trajectory,
    wind: &WindState,
    cfg: &ScenarioConfig,
) -> OccupancyGrid {
    let mut grid = snapshot.clone();
    simulate_in_place(&mut grid, traj, wind, cfg);
    grid
}

pub(crate) fn simulate_in_place(
    grid: &mut OccupancyGrid,
    traj: &Trajectory,
    wind: &WindState,
    cfg: &ScenarioConfig,
) {
    let params = PredictionParams::from_config(cfg);
    for s in traj.samples.iter().skip(1) {
        if cfg.mapping.prediction_step {
            update_prediction(grid, wind, cfg.mission.dt, &params);
        }
        expected_measurement_update(grid, &s.pose, &cfg.sensor);
    }
}

/// Fov-averaged tracking reward of one pose on one predicted grid. Zero when
/// the fov misses the grid entirely.
pub fn fov_reward(
    pred: &PredictedGrid,
    pose: &Pose,
    params: &SensorModelParams,
    form: TrackingForm,
) -> f64 {
    let cells = pred.geometry.fov_cells(pose, params);
    if cells.is_empty() {
        return 0.0;
    }
    let sum: f64 = cells.iter().map(|&i| form.reward(pred.values[i])).sum();
    sum / cells.len() as f64
}

/// Prediction steps of `traj`: every `interval` seconds, excluding `t = 0`.
pub fn prediction_steps(traj: &Trajectory, interval: f64) -> Vec<TimedPose> {
    traj.poses_every(interval)
}

/// Mean fov reward over the prediction steps of `traj`, with one predicted
/// grid per step (in order).
pub fn tracking_utility(
    traj: &Trajectory,
    predictions: &[PredictedGrid],
    cfg: &ScenarioConfig,
) -> Result<f64> {
    let steps = prediction_steps(traj, cfg.planner.prediction_interval_s);
    if steps.len() != predictions.len() {
        return Err(Error::PredictionCount {
            expected: steps.len(),
            got: predictions.len(),
        });
    }
    Ok(mean_reward(
        steps.iter().zip(predictions).map(|(s, p)| (s.pose, p)),
        cfg,
    ))
}

fn mean_reward<'a>(
    pairs: impl Iterator<Item = (Pose, &'a PredictedGrid)>,
    cfg: &ScenarioConfig,
) -> f64 {
    let mut n = 0usize;
    let mut sum = 0.0;
    for (pose, pred) in pairs {
        sum += fov_reward(pred, &pose, &cfg.sensor, cfg.planner.tracking_form);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn entropy_term(prior: f64, posterior: f64, sign: EntropySign) -> f64 {
    match sign {
        EntropySign::Reduction => prior - posterior,
        EntropySign::Literal => posterior - prior,
    }
}

/// Shared, read-only inputs for scoring candidates during one replan.
pub struct PlanningContext<'a> {
    pub grid: &'a OccupancyGrid,
    pub wind: WindState,
    pub t_now: f64,
    pub w: f64,
    pub prior_entropy: f64,
    centroids: Vec<Point>,
    /// Predictions at `k · interval`, `k = 1, 2, …`.
    predictions: Vec<PredictedGrid>,
    cfg: &'a ScenarioConfig,
}

impl<'a> PlanningContext<'a> {
    /// Precomputes predictions for horizons up to `max_horizon_s`.
    pub fn new(
        grid: &'a OccupancyGrid,
        wind: &WindState,
        t_now: f64,
        max_horizon_s: f64,
        cfg: &'a ScenarioConfig,
    ) -> Result<Self> {
        let w = weight_schedule(&cfg.planner.weight, t_now, cfg.mission.budget_s);
        let centroids = binarize(grid).centroids();
        let interval = cfg.planner.prediction_interval_s;
        let n = (max_horizon_s / interval + 1e-9).floor() as usize;
        let predictions = if w == 0.0 {
            // tracking is multiplied by zero; skip the rendering work
            Vec::new()
        } else {
            (1..=n)
                .map(|k| {
                    predict_from_centroids(
                        &centroids,
                        grid.geometry,
                        wind,
                        k as f64 * interval,
                        cfg.wind.gamma,
                        &cfg.predictor,
                    )
                })
                .collect::<Result<_>>()?
        };
        Ok(Self {
            grid,
            wind: *wind,
            t_now,
            w,
            prior_entropy: mean_entropy(grid),
            centroids,
            predictions,
            cfg,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        self.cfg
    }

    fn prediction_at(&self, t: f64) -> Result<Cow<'_, PredictedGrid>> {
        let interval = self.cfg.planner.prediction_interval_s;
        let k = (t / interval).round() as usize;
        if k >= 1 && (k as f64 * interval - t).abs() < 1e-9 && k <= self.predictions.len() {
            return Ok(Cow::Borrowed(&self.predictions[k - 1]));
        }
        predict_from_centroids(
            &self.centroids,
            self.grid.geometry,
            &self.wind,
            t,
            self.cfg.wind.gamma,
            &self.cfg.predictor,
        )
        .map(Cow::Owned)
    }

    fn tracking_for(&self, steps: &[TimedPose]) -> Result<f64> {
        if self.w == 0.0 {
            // still honour the definition when the weight vanishes
            return Ok(0.0);
        }
        let preds = steps
            .iter()
            .map(|s| self.prediction_at(s.t))
            .collect::<Result<Vec<_>>>()?;
        Ok(mean_reward(
            steps.iter().zip(&preds).map(|(s, p)| (s.pose, p.as_ref())),
            self.cfg,
        ))
    }

    /// Full-horizon utility of `traj` (tree search, receding horizon).
    pub fn evaluate(&self, traj: &Trajectory) -> Result<UtilityBreakdown> {
        if traj.is_empty() {
            return Ok(UtilityBreakdown::new(0.0, 0.0, self.w));
        }
        let posterior = forward_simulate(self.grid, traj, &self.wind, self.cfg);
        let h = entropy_term(
            self.prior_entropy,
            mean_entropy(&posterior),
            self.cfg.planner.entropy_sign,
        );
        let steps = prediction_steps(traj, self.cfg.planner.prediction_interval_s);
        Ok(UtilityBreakdown::new(h, self.tracking_for(&steps)?, self.w))
    }

    /// Utility of a two-segment sequence; the second segment starts where
    /// the first ends.
    pub fn evaluate_sequence(
        &self,
        first: &Trajectory,
        first_posterior: &OccupancyGrid,
        second: &Trajectory,
    ) -> Result<UtilityBreakdown> {
        let mut grid = first_posterior.clone();
        simulate_in_place(&mut grid, second, &self.wind, self.cfg);
        let h = entropy_term(
            self.prior_entropy,
            mean_entropy(&grid),
            self.cfg.planner.entropy_sign,
        );
        let interval = self.cfg.planner.prediction_interval_s;
        let total = first.duration_s + second.duration_s;
        let n = (total / interval + 1e-9).floor() as usize;
        let steps: Vec<TimedPose> = (1..=n)
            .map(|k| {
                let t = k as f64 * interval;
                let pose = if t <= first.duration_s {
                    first.pose_at(t).0
                } else {
                    second.pose_at(t - first.duration_s).0
                };
                TimedPose { t, pose }
            })
            .collect();
        Ok(UtilityBreakdown::new(h, self.tracking_for(&steps)?, self.w))
    }

    /// Myopic utility from the final pose only: one drift step over the
    /// whole duration, one expected measurement, one prediction.
    pub fn evaluate_final_pose(&self, traj: &Trajectory) -> Result<UtilityBreakdown> {
        if traj.is_empty() {
            return Ok(UtilityBreakdown::new(0.0, 0.0, self.w));
        }
        let end = traj.end_pose();
        let mut grid = self.grid.clone();
        if self.cfg.mapping.prediction_step {
            update_prediction(
                &mut grid,
                &self.wind,
                traj.duration_s,
                &PredictionParams::from_config(self.cfg),
            );
        }
        expected_measurement_update(&mut grid, &end, &self.cfg.sensor);
        let h = entropy_term(
            self.prior_entropy,
            mean_entropy(&grid),
            self.cfg.planner.entropy_sign,
        );
        let step = [TimedPose {
            t: traj.duration_s,
            pose: end,
        }];
        Ok(UtilityBreakdown::new(h, self.tracking_for(&step)?, self.w))
    }
}

/// Utility of `traj` given the live grid (convenience wrapper that builds a
/// one-off [`PlanningContext`]).
pub fn utility(
    traj: &Trajectory,
    grid: &OccupancyGrid,
    wind: &WindState,
    t_now: f64,
    cfg: &ScenarioConfig,
) -> Result<UtilityBreakdown> {
    PlanningContext::new(grid, wind, t_now, traj.duration_s, cfg)?.evaluate(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::GridGeometry;
    use crate::planner::candidates::candidate_paths;

    #[test]
    fn schedules() {
        let decay = WeightSchedule::LinearDecay { w0: 5.0 };
        assert_eq!(weight_schedule(&decay, 0.0, 250.0), 5.0);
        assert_eq!(weight_schedule(&decay, 250.0, 250.0), 0.0);
        let c = WeightSchedule::Constant { w: 2.0 };
        assert_eq!(weight_schedule(&c, 0.0, 250.0), 2.0);
        assert_eq!(weight_schedule(&c, 137.0, 250.0), 2.0);
    }

    #[test]
    fn schedule_parsing() {
        assert_eq!("2".parse(), Ok(WeightSchedule::Constant { w: 2.0 }));
        assert_eq!(
            "decay(5)".parse(),
            Ok(WeightSchedule::LinearDecay { w0: 5.0 })
        );
        assert_eq!(
            "5(1-t/B)".parse(),
            Ok(WeightSchedule::LinearDecay { w0: 5.0 })
        );
        assert!("fast".parse::<WeightSchedule>().is_err());
        let s = WeightSchedule::LinearDecay { w0: 5.0 };
        assert_eq!(s.to_string().parse(), Ok(s));
    }

    fn constant_prediction(geo: GridGeometry, values: Vec<f64>, t: f64) -> PredictedGrid {
        PredictedGrid {
            geometry: geo,
            values,
            horizon_s: t,
            wind: WindState::calm(),
        }
    }

    #[test]
    fn tracking_on_constant_fields() {
        let cfg = ScenarioConfig::default();
        let geo = GridGeometry::from_map(&cfg.map);
        let traj = &candidate_paths(&Pose::new(50.0, 50.0, 0.0), &cfg).unwrap()[3];
        let n = prediction_steps(traj, 5.0).len();
        assert_eq!(n, 5);
        let zeros: Vec<_> = (1..=n)
            .map(|k| constant_prediction(geo, vec![0.0; geo.len()], 5.0 * k as f64))
            .collect();
        assert_eq!(tracking_utility(traj, &zeros, &cfg).unwrap(), 1.0);
        let ones: Vec<_> = (1..=n)
            .map(|k| constant_prediction(geo, vec![1.0; geo.len()], 5.0 * k as f64))
            .collect();
        let v = tracking_utility(traj, &ones, &cfg).unwrap();
        assert!((v - (-2.0f64).exp()).abs() < 1e-12);
        assert!(matches!(
            tracking_utility(traj, &ones[..2], &cfg),
            Err(Error::PredictionCount {
                expected: 5,
                got: 2
            })
        ));
    }

    #[test]
    fn half_covered_fov() {
        let cfg = ScenarioConfig::default();
        let geo = GridGeometry::from_map(&cfg.map);
        let pose = Pose::new(50.0, 50.0, 0.0);
        let cells = geo.fov_cells(&pose, &cfg.sensor);
        let mut values = vec![0.0; geo.len()];
        for &i in cells.iter().take(cells.len() / 2) {
            values[i] = 1.0;
        }
        let half = cells.len() / 2;
        let pred = constant_prediction(geo, values, 5.0);
        let direct =
            ((cells.len() - half) as f64 + half as f64 * (-2.0f64).exp()) / cells.len() as f64;
        let j = fov_reward(&pred, &pose, &cfg.sensor, TrackingForm::Literal);
        assert!((j - direct).abs() < 1e-12);
        if cells.len().is_multiple_of(2) {
            assert!((j - 0.568).abs() < 1e-3);
        }
    }

    #[test]
    fn forward_simulation_reduces_entropy_and_isolates() {
        let cfg = ScenarioConfig::default();
        let grid = OccupancyGrid::from_config(&cfg);
        let sum = grid.checksum();
        let traj = &candidate_paths(&Pose::new(50.0, 50.0, 0.0), &cfg).unwrap()[3];
        let post = forward_simulate(&grid, traj, &WindState::new(8.0, 0.3), &cfg);
        assert!(mean_entropy(&post) < mean_entropy(&grid));
        assert_eq!(grid.checksum(), sum);

        let empty = Trajectory::stationary(Pose::new(50.0, 50.0, 0.0), 1.5, 1.0);
        assert_eq!(
            forward_simulate(&grid, &empty, &WindState::new(8.0, 0.3), &cfg),
            grid
        );
    }

    #[test]
    fn zero_weight_total_is_entropy_term() {
        let mut cfg = ScenarioConfig::default();
        cfg.planner.weight = WeightSchedule::Constant { w: 0.0 };
        let grid = OccupancyGrid::from_config(&cfg);
        let traj = &candidate_paths(&Pose::new(50.0, 50.0, 0.0), &cfg).unwrap()[2];
        let u = utility(traj, &grid, &WindState::new(8.0, 0.0), 10.0, &cfg).unwrap();
        assert_eq!(u.total, u.entropy_term);
        assert!(u.entropy_term > 0.0);
        let again = utility(traj, &grid, &WindState::new(8.0, 0.0), 10.0, &cfg).unwrap();
        assert_eq!(u, again);
    }

    #[test]
    fn empty_trajectory_scores_zero() {
        let cfg = ScenarioConfig::default();
        let grid = OccupancyGrid::from_config(&cfg);
        let empty = Trajectory::stationary(Pose::new(50.0, 50.0, 0.0), 1.5, 1.0);
        let u = utility(&empty, &grid, &WindState::calm(), 0.0, &cfg).unwrap();
        assert_eq!(u.total, 0.0);
    }
}
