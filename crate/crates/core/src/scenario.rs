//! Scenario configuration, validation and seeded world construction.
//!
//! Configuration files are TOML. Every field has a default, so an empty file
//! (or no file) yields the reference experiment: a 100 m × 100 m map at 1 m
//! resolution, eight targets, γ = 0.03, a 1.5 m/s vehicle, a 25 s planning
//! horizon and a 250 s mission.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{TargetState, WindState};
use crate::error::{Error, Result};
use crate::geometry::{Bounds, Point, Pose};
use crate::perception::SensorModelParams;
use crate::planner::PlannerConfig;
use crate::predictor::PredictorConfig;
use crate::rng::{substream, Stream};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub rng_seed: u64,
    pub map: MapConfig,
    pub targets: TargetsConfig,
    pub wind: WindConfig,
    pub asv: AsvConfig,
    pub mission: MissionConfig,
    pub sensor: SensorModelParams,
    pub mapping: MappingConfig,
    pub predictor: PredictorConfig,
    pub planner: PlannerConfig,
    pub metrics: MetricsConfig,
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    pub width_m: f64,
    pub height_m: f64,
    pub cell_dx: f64,
    pub cell_dy: f64,
    pub origin_x: f64,
    pub origin_y: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            width_m: 100.0,
            height_m: 100.0,
            cell_dx: 1.0,
            cell_dy: 1.0,
            origin_x: 0.0,
            origin_y: 0.0,
        }
    }
}

impl MapConfig {
    pub fn nx(&self) -> usize {
        (self.width_m / self.cell_dx).round() as usize
    }

    pub fn ny(&self) -> usize {
        (self.height_m / self.cell_dy).round() as usize
    }

    pub fn bounds(&self) -> Bounds {
        Bounds {
            x0: self.origin_x,
            y0: self.origin_y,
            width: self.width_m,
            height: self.height_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetsConfig {
    pub count: usize,
    /// Explicit spawn positions; when empty, targets spawn uniformly.
    pub spawn: Vec<[f64; 2]>,
    /// Per-axis drift process noise std, meters per step.
    pub process_noise_std: f64,
}

impl Default for TargetsConfig {
    fn default() -> Self {
        Self {
            count: 8,
            spawn: Vec::new(),
            process_noise_std: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindConfig {
    pub mean_speed: f64,
    /// Radians, direction the wind blows toward.
    pub mean_dir: f64,
    pub time_constant_s: f64,
    /// m/s per √s.
    pub speed_noise_std: f64,
    /// rad per √s.
    pub dir_noise_std: f64,
    /// Drift-to-wind speed ratio of a floating target.
    pub gamma: f64,
}

impl Default for WindConfig {
    fn default() -> Self {
        Self {
            mean_speed: 8.0,
            mean_dir: 0.0,
            time_constant_s: 20.0,
            speed_noise_std: 0.5,
            dir_noise_std: 0.05,
            gamma: 0.03,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsvConfig {
    pub speed: f64,
    /// Start pose `[x, y, heading]`; `None` starts at the map center facing +x.
    pub start: Option<[f64; 3]>,
}

impl Default for AsvConfig {
    fn default() -> Self {
        Self {
            speed: 1.5,
            start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionConfig {
    pub budget_s: f64,
    pub dt: f64,
    pub planning_horizon_s: f64,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            budget_s: 250.0,
            dt: 1.0,
            planning_horizon_s: 25.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingConfig {
    pub alpha: f64,
    pub beta: f64,
    pub p_low: f64,
    pub p_high: f64,
    /// Disable to run the static (estimation-only) mapper.
    pub prediction_step: bool,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            beta: 0.1,
            p_low: 0.15,
            p_high: 0.9,
            prediction_step: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Std of the ground-truth smoothing kernel, in cells.
    pub sigma_g: f64,
    /// Kernel support, in multiples of `sigma_g`.
    pub truncate: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            sigma_g: 2.0,
            truncate: 4.0,
        }
    }
}

/// Per-trial randomisation used by Monte-Carlo sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub mean_speed_min: f64,
    pub mean_speed_max: f64,
    pub randomize_direction: bool,
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            mean_speed_min: 6.0,
            mean_speed_max: 10.0,
            randomize_direction: true,
            workers: 0,
        }
    }
}

/// One broken configuration rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub rule: &'static str,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

fn is_multiple(total: f64, step: f64) -> bool {
    if !(step > 0.0) || !total.is_finite() {
        return false;
    }
    let n = (total / step).round();
    n >= 1.0 && (n * step - total).abs() <= 1e-9 * total.abs().max(1.0)
}

/// Checks every configuration invariant. Returns an empty list iff valid.
pub fn validate(cfg: &ScenarioConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut check = |ok: bool, field: &'static str, rule: &'static str| {
        if !ok {
            out.push(Violation { field, rule });
        }
    };

    let m = &cfg.map;
    check(m.cell_dx > 0.0, "map.cell_dx", "cell_dx>0");
    check(m.cell_dy > 0.0, "map.cell_dy", "cell_dy>0");
    check(
        is_multiple(m.width_m, m.cell_dx),
        "map.width_m",
        "width is a multiple of cell_dx",
    );
    check(
        is_multiple(m.height_m, m.cell_dy),
        "map.height_m",
        "height is a multiple of cell_dy",
    );

    let mp = &cfg.mapping;
    check(
        mp.p_low > 0.0 && mp.p_low < 0.5,
        "mapping.p_low",
        "0<p_low<0.5",
    );
    check(
        mp.p_high > 0.5 && mp.p_high < 1.0,
        "mapping.p_high",
        "0.5<p_high<1",
    );
    check(
        (mp.alpha + mp.beta - 1.0).abs() <= 1e-9,
        "mapping.alpha",
        "alpha+beta≠1",
    );
    check(
        mp.alpha > 0.0 && mp.alpha <= 1.0,
        "mapping.alpha",
        "alpha in (0,1]",
    );
    check(mp.beta >= 0.0, "mapping.beta", "beta>=0");

    let w = &cfg.wind;
    check(w.gamma > 0.0, "wind.gamma", "gamma>0");
    check(w.mean_speed >= 0.0, "wind.mean_speed", "mean_speed>=0");
    check(w.mean_dir.is_finite(), "wind.mean_dir", "finite");
    check(
        w.time_constant_s > 0.0,
        "wind.time_constant_s",
        "time_constant_s>0",
    );
    check(
        w.speed_noise_std >= 0.0,
        "wind.speed_noise_std",
        "speed_noise_std>=0",
    );
    check(
        w.dir_noise_std >= 0.0,
        "wind.dir_noise_std",
        "dir_noise_std>=0",
    );

    let ms = &cfg.mission;
    check(ms.dt > 0.0, "mission.dt", "dt>0");
    check(
        ms.planning_horizon_s > 0.0,
        "mission.planning_horizon_s",
        "planning_horizon_s>0",
    );
    check(
        ms.budget_s >= ms.planning_horizon_s,
        "mission.budget_s",
        "budget_s>=planning_horizon_s",
    );

    check(cfg.asv.speed > 0.0, "asv.speed", "speed>0");
    if let Some([x, y, psi]) = cfg.asv.start {
        check(
            m.bounds().contains(Point::new(x, y)) && psi.is_finite(),
            "asv.start",
            "start inside map",
        );
    }

    let t = &cfg.targets;
    check(
        t.spawn.is_empty() || t.spawn.len() == t.count,
        "targets.spawn",
        "spawn list length equals count",
    );
    check(
        t.spawn
            .iter()
            .all(|&[x, y]| m.bounds().contains(Point::new(x, y))),
        "targets.spawn",
        "spawn positions inside map",
    );
    check(
        t.process_noise_std >= 0.0,
        "targets.process_noise_std",
        "process_noise_std>=0",
    );

    let s = &cfg.sensor;
    check(s.max_range > 0.0, "sensor.max_range", "max_range>0");
    check(
        s.horizontal_fov > 0.0 && s.horizontal_fov <= std::f64::consts::TAU,
        "sensor.horizontal_fov",
        "0<horizontal_fov<=2pi",
    );
    check(
        (0.0..=1.0).contains(&s.miss_rate),
        "sensor.miss_rate",
        "miss_rate in [0,1]",
    );

    let p = &cfg.planner;
    check(
        !p.heading_changes_deg.is_empty(),
        "planner.heading_changes_deg",
        "at least one candidate",
    );
    check(
        p.prediction_interval_s > 0.0,
        "planner.prediction_interval_s",
        "prediction_interval_s>0",
    );
    check(
        p.tree_depth == 1 || p.tree_depth == 2,
        "planner.tree_depth",
        "tree_depth in {1,2}",
    );
    check(
        p.replan_stall_s >= 0.0,
        "planner.replan_stall_s",
        "replan_stall_s>=0",
    );
    check(
        p.lawnmower_spacing_factor > 0.0,
        "planner.lawnmower_spacing_factor",
        "lawnmower_spacing_factor>0",
    );
    check(
        p.max_curvature > 0.0,
        "planner.max_curvature",
        "max_curvature>0",
    );

    check(
        cfg.predictor.calm_threshold >= 0.0,
        "predictor.calm_threshold",
        "calm_threshold>=0",
    );
    check(cfg.metrics.sigma_g > 0.0, "metrics.sigma_g", "sigma_g>0");
    check(cfg.metrics.truncate > 0.0, "metrics.truncate", "truncate>0");
    check(
        cfg.sweep.mean_speed_min >= 0.0 && cfg.sweep.mean_speed_min <= cfg.sweep.mean_speed_max,
        "sweep.mean_speed_min",
        "0<=mean_speed_min<=mean_speed_max",
    );
    out
}

impl ScenarioConfig {
    pub fn validated(self) -> Result<Self> {
        let v = validate(&self);
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidConfig(v))
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Parses `text` and applies `key=value` overrides (dotted keys, TOML
    /// literal values; bare words are taken as strings).
    pub fn from_toml_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut root: toml::Table =
            toml::from_str(text).map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))?;
        for (key, value) in overrides {
            set_dotted(&mut root, key, parse_literal(value))?;
        }
        let text = toml::to_string(&root).map_err(|e| Error::ConfigParse(e.to_string()))?;
        Self::from_toml_str(&text)
    }

    pub fn start_pose(&self) -> Pose {
        match self.asv.start {
            Some([x, y, psi]) => Pose::new(x, y, psi),
            None => {
                let c = self.map.bounds().center();
                Pose::new(c.x, c.y, 0.0)
            }
        }
    }

    /// Short hex digest of the canonical TOML form.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn parse_literal(value: &str) -> toml::Value {
    let doc = format!("v = {value}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(value.into())),
        Err(_) => toml::Value::String(value.to_string()),
    }
}

fn set_dotted(root: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Override {
            key: key.into(),
            reason: "empty path segment".into(),
        });
    }
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut table = root;
    for p in parents {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = match entry {
            toml::Value::Table(t) => t,
            _ => {
                return Err(Error::Override {
                    key: key.into(),
                    reason: format!("`{p}` is not a section"),
                })
            }
        };
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// Ground truth plus vehicle state at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub targets: Vec<TargetState>,
    pub wind: WindState,
    pub asv: Pose,
    pub clock_s: f64,
}

/// Builds the initial world. Identical `(config, seed)` pairs give identical worlds.
pub fn build_world(cfg: &ScenarioConfig, seed: u64) -> Result<World> {
    let v = validate(cfg);
    if !v.is_empty() {
        return Err(Error::InvalidConfig(v));
    }
    let bounds = cfg.map.bounds();
    let targets = if cfg.targets.spawn.is_empty() {
        let mut rng = substream(seed, Stream::Spawn);
        (0..cfg.targets.count)
            .map(|id| TargetState {
                id: id as u32,
                x: bounds.x0 + rng.random::<f64>() * bounds.width,
                y: bounds.y0 + rng.random::<f64>() * bounds.height,
            })
            .collect()
    } else {
        cfg.targets
            .spawn
            .iter()
            .enumerate()
            .map(|(id, &[x, y])| TargetState {
                id: id as u32,
                x,
                y,
            })
            .collect()
    };
    Ok(World {
        targets,
        wind: WindState::new(cfg.wind.mean_speed, cfg.wind.mean_dir),
        asv: cfg.start_pose(),
        clock_s: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        assert!(validate(&ScenarioConfig::default()).is_empty());
    }

    #[test]
    fn alpha_beta_must_sum_to_one() {
        let mut cfg = ScenarioConfig::default();
        cfg.mapping.alpha = 0.9;
        cfg.mapping.beta = 0.2;
        let v = validate(&cfg);
        assert!(v.iter().any(|v| v.rule == "alpha+beta≠1"), "{v:?}");
    }

    #[test]
    fn dt_must_be_positive() {
        let mut cfg = ScenarioConfig::default();
        cfg.mission.dt = 0.0;
        assert!(validate(&cfg).iter().any(|v| v.rule == "dt>0"));
    }

    #[test]
    fn p_low_above_half_is_rejected() {
        let mut cfg = ScenarioConfig::default();
        cfg.mapping.p_low = 0.6;
        match build_world(&cfg, 1) {
            Err(Error::InvalidConfig(v)) => {
                assert!(v.iter().any(|v| v.field == "mapping.p_low"))
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn map_must_tile_exactly() {
        let mut cfg = ScenarioConfig::default();
        cfg.map.cell_dx = 0.3;
        assert!(validate(&cfg).iter().any(|v| v.field == "map.width_m"));
        cfg.map.cell_dx = 0.25;
        assert!(validate(&cfg).is_empty());
    }

    #[test]
    fn budget_must_cover_horizon() {
        let mut cfg = ScenarioConfig::default();
        cfg.mission.budget_s = 10.0;
        assert!(validate(&cfg)
            .iter()
            .any(|v| v.rule == "budget_s>=planning_horizon_s"));
    }

    #[test]
    fn world_has_eight_targets_in_bounds() {
        let cfg = ScenarioConfig::default();
        let w = build_world(&cfg, 3).unwrap();
        assert_eq!(w.targets.len(), 8);
        let b = cfg.map.bounds();
        assert!(w.targets.iter().all(|t| b.contains(Point::new(t.x, t.y))));
        assert_eq!(w.wind.speed, cfg.wind.mean_speed);
        assert_eq!(w.asv, Pose::new(50.0, 50.0, 0.0));
    }

    #[test]
    fn world_is_deterministic() {
        let cfg = ScenarioConfig::default();
        assert_eq!(
            build_world(&cfg, 11).unwrap(),
            build_world(&cfg, 11).unwrap()
        );
        assert_ne!(
            build_world(&cfg, 11).unwrap(),
            build_world(&cfg, 12).unwrap()
        );
    }

    #[test]
    fn explicit_spawns_are_used() {
        let mut cfg = ScenarioConfig::default();
        cfg.targets.count = 2;
        cfg.targets.spawn = vec![[10.0, 20.0], [30.0, 40.0]];
        let w = build_world(&cfg, 0).unwrap();
        assert_eq!((w.targets[1].x, w.targets[1].y), (30.0, 40.0));
    }

    #[test]
    fn toml_round_trip_is_byte_identical() {
        let mut cfg = ScenarioConfig::default();
        cfg.targets.spawn = vec![[1.5, 2.25]];
        cfg.targets.count = 1;
        cfg.asv.start = Some([10.0, 10.0, 0.5]);
        let a = cfg.to_toml_string();
        let parsed = ScenarioConfig::from_toml_str(&a).unwrap();
        assert_eq!(parsed, cfg);
        assert_eq!(parsed.to_toml_string(), a);
    }

    #[test]
    fn overrides_take_precedence() {
        let text = "[wind]\nmean_speed = 6.0\n";
        let cfg = ScenarioConfig::from_toml_with_overrides(
            text,
            &[
                ("wind.mean_speed".into(), "9.5".into()),
                ("planner.kind".into(), "greedy".into()),
            ],
        )
        .unwrap();
        assert_eq!(cfg.wind.mean_speed, 9.5);
        assert_eq!(cfg.planner.kind, crate::planner::PlannerKind::Greedy);
        assert!(
            ScenarioConfig::from_toml_with_overrides("", &[("nope.x".into(), "1".into())]).is_err()
        );
    }
}
