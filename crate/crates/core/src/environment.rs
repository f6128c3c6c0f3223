//! Ground-truth dynamics: Gauss-Markov wind, wind-driven target drift and
//! exact trajectory following for the vehicle.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Point, Pose};
use crate::planner::Trajectory;
use crate::scenario::WindConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindState {
    /// m/s, never negative.
    pub speed: f64,
    /// Direction the wind blows toward, radians in (−π, π].
    pub dir: f64,
}

impl WindState {
    pub fn new(speed: f64, dir: f64) -> Self {
        Self {
            speed: speed.max(0.0),
            dir: wrap_angle(dir),
        }
    }

    pub fn calm() -> Self {
        Self::new(0.0, 0.0)
    }

    /// Velocity components `(v_x, v_y)`.
    pub fn components(&self) -> (f64, f64) {
        (self.speed * self.dir.cos(), self.speed * self.dir.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub id: u32,
    pub x: f64,
    pub y: f64,
}

impl TargetState {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Displacement of a floating object over `dt` seconds of wind.
pub fn drift(wind: &WindState, gamma: f64, dt: f64) -> (f64, f64) {
    let step = gamma * wind.speed * dt;
    (step * wind.dir.cos(), step * wind.dir.sin())
}

/// First-order Gauss-Markov update of speed and direction toward their means.
///
/// Two standard normals are always drawn so the stream position does not
/// depend on the noise settings.
pub fn step_wind<R: Rng + ?Sized>(
    wind: &WindState,
    cfg: &WindConfig,
    dt: f64,
    rng: &mut R,
) -> WindState {
    let decay = (-dt / cfg.time_constant_s).exp();
    let n_speed: f64 = rng.sample(StandardNormal);
    let n_dir: f64 = rng.sample(StandardNormal);
    let sqrt_dt = dt.sqrt();

    let speed = cfg.mean_speed
        + (wind.speed - cfg.mean_speed) * decay
        + cfg.speed_noise_std * sqrt_dt * n_speed;
    let dir_err = wrap_angle(wind.dir - cfg.mean_dir);
    let dir = cfg.mean_dir + dir_err * decay + cfg.dir_noise_std * sqrt_dt * n_dir;
    WindState::new(speed, dir)
}

/// Translates each target by the wind drift plus optional per-axis noise.
/// Targets that leave the map are kept.
pub fn step_targets<R: Rng + ?Sized>(
    targets: &mut [TargetState],
    wind: &WindState,
    gamma: f64,
    noise_std: f64,
    dt: f64,
    rng: &mut R,
) {
    let (dx, dy) = drift(wind, gamma, dt);
    for t in targets.iter_mut() {
        let nx: f64 = rng.sample(StandardNormal);
        let ny: f64 = rng.sample(StandardNormal);
        t.x += dx + noise_std * nx;
        t.y += dy + noise_std * ny;
    }
}

/// Vehicle pose `elapsed_s` seconds into `traj`, and whether the trajectory
/// has been completed.
pub fn step_asv(traj: &Trajectory, elapsed_s: f64) -> (Pose, bool) {
    traj.pose_at(elapsed_s)
}
