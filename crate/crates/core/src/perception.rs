//! Sensor geometry and simulated target detection.
//!
//! The detector is perfect inside the field of view (optionally with a miss
//! rate); localisation error is isotropic Gaussian with a range-dependent
//! standard deviation.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::environment::TargetState;
use crate::geometry::{wrap_angle, Point, Pose};

/// Coefficient of the quadratic localisation error fit, 1/m.
pub const SIGMA_COEFF: f64 = 0.0012;

const BEARING_EPS: f64 = 1e-9;
const MAX_RESAMPLE: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorModelParams {
    /// Positive-model sigmoid slope, 1/m.
    pub a: f64,
    /// Positive-model sigmoid midpoint, m.
    pub d: f64,
    /// Negative-model slope, 1/m.
    pub a_prime: f64,
    /// Negative-model midpoint, m.
    pub d_prime: f64,
    pub max_range: f64,
    /// Full horizontal field of view, radians.
    pub horizontal_fov: f64,
    pub miss_rate: f64,
}

impl Default for SensorModelParams {
    fn default() -> Self {
        Self {
            a: 0.1,
            d: 40.0,
            a_prime: -0.018,
            d_prime: 35.0,
            max_range: 35.0,
            horizontal_fov: 72f64.to_radians(),
            miss_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Measured position, global frame.
    pub x: f64,
    pub y: f64,
    /// Range from the observing pose to the measured position.
    pub range: f64,
    /// Only for logging; mapping and planning never read it.
    pub true_target_id: u32,
}

impl Detection {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Localisation error std at range `r`.
pub fn localization_sigma(r: f64) -> f64 {
    SIGMA_COEFF * r * r
}

/// True iff `point` is within `max_range` of `pose` and within ±fov/2 of its
/// heading. Both boundaries are inclusive.
pub fn in_fov(pose: &Pose, point: Point, params: &SensorModelParams) -> bool {
    let dx = point.x - pose.x;
    let dy = point.y - pose.y;
    let range = dx.hypot(dy);
    if range > params.max_range {
        return false;
    }
    if range == 0.0 || params.horizontal_fov >= std::f64::consts::TAU {
        return true;
    }
    let bearing = wrap_angle(dy.atan2(dx) - pose.psi);
    bearing.abs() <= 0.5 * params.horizontal_fov + BEARING_EPS
}

/// Camera → body axes permutation for a forward-facing camera
/// (camera z forward, x right, y down).
const R_BC: [[f64; 3]; 3] = [[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]];

fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn yaw(psi: f64) -> [[f64; 3]; 3] {
    let (s, c) = psi.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn transpose(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut t = [[0.0; 3]; 3];
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            t[j][i] = *v;
        }
    }
    t
}

/// Projects a camera-frame point into the global ENU frame.
pub fn camera_to_global(p_c: [f64; 3], pose: &Pose) -> [f64; 3] {
    let body = mat_vec(&R_BC, p_c);
    let g = mat_vec(&yaw(pose.psi), body);
    [g[0] + pose.x, g[1] + pose.y, g[2]]
}

/// Inverse of [`camera_to_global`].
pub fn global_to_camera(p_g: [f64; 3], pose: &Pose) -> [f64; 3] {
    let rel = [p_g[0] - pose.x, p_g[1] - pose.y, p_g[2]];
    let body = mat_vec(&transpose(&yaw(pose.psi)), rel);
    mat_vec(&transpose(&R_BC), body)
}

/// One detection per visible target, with localisation noise of std
/// `localization_sigma(r)` per axis. Noisy positions that fall outside the
/// field of view are redrawn so every detection satisfies the fov contract.
pub fn simulate_detections<R: Rng + ?Sized>(
    targets: &[TargetState],
    pose: &Pose,
    params: &SensorModelParams,
    rng: &mut R,
) -> Vec<Detection> {
    let mut out = Vec::new();
    for t in targets {
        let truth = Point::new(t.x, t.y);
        if !in_fov(pose, truth, params) {
            continue;
        }
        let miss = rng.random::<f64>() < params.miss_rate;
        let sigma = localization_sigma(truth.distance(pose.position()));
        let mut measured = truth;
        for _ in 0..MAX_RESAMPLE {
            let nx: f64 = rng.sample(StandardNormal);
            let ny: f64 = rng.sample(StandardNormal);
            let candidate = Point::new(truth.x + sigma * nx, truth.y + sigma * ny);
            if in_fov(pose, candidate, params) {
                measured = candidate;
                break;
            }
        }
        if miss {
            continue;
        }
        out.push(Detection {
            x: measured.x,
            y: measured.y,
            range: measured.distance(pose.position()),
            true_target_id: t.id,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn sigma_values() {
        assert!((localization_sigma(35.0) - 1.47).abs() < 1e-12);
        assert!((localization_sigma(10.0) - 0.12).abs() < 1e-12);
        assert_eq!(localization_sigma(0.0), 0.0);
    }

    #[test]
    fn fov_boundaries_are_inclusive() {
        let p = SensorModelParams::default();
        let pose = Pose::new(0.0, 0.0, 0.3);
        let ahead = Point::new(35.0 * 0.3f64.cos(), 35.0 * 0.3f64.sin());
        assert!(in_fov(&pose, ahead, &p));
        let edge_angle = 0.3 + 0.5 * p.horizontal_fov;
        let edge = Point::new(10.0 * edge_angle.cos(), 10.0 * edge_angle.sin());
        assert!(in_fov(&pose, edge, &p));
        let beyond = Point::new(36.0 * 0.3f64.cos(), 36.0 * 0.3f64.sin());
        assert!(!in_fov(&pose, beyond, &p));
    }

    #[test]
    fn behind_is_outside() {
        let p = SensorModelParams::default();
        let pose = Pose::new(5.0, 5.0, 0.0);
        assert!(!in_fov(&pose, Point::new(0.0, 5.0), &p));
    }

    #[test]
    fn camera_projection() {
        let out = camera_to_global([0.0, 0.0, 7.0], &Pose::new(0.0, 0.0, 0.0));
        assert_eq!(out, [7.0, 0.0, 0.0]);
        assert_eq!(camera_to_global([0.0; 3], &Pose::default()), [0.0; 3]);
        // Hand-multiplied: R_z(π/2)·R_bc·(0,0,z) = R_z(π/2)·(z,0,0) = (0,z,0).
        let out = camera_to_global([0.0, 0.0, 4.0], &Pose::new(0.0, 0.0, FRAC_PI_2));
        assert!(out[0].abs() < 1e-12 && (out[1] - 4.0).abs() < 1e-12 && out[2] == 0.0);
        // Camera x (right) maps to the starboard side.
        let out = camera_to_global([1.0, 0.0, 0.0], &Pose::new(2.0, 3.0, 0.0));
        assert_eq!(out, [2.0, 2.0, 0.0]);
    }

    #[test]
    fn camera_round_trip() {
        let pose = Pose::new(12.5, -3.0, 2.1);
        for p in [[1.0, 2.0, 3.0], [-4.0, 0.5, 20.0], [0.0, 0.0, 0.0]] {
            let back = global_to_camera(camera_to_global(p, &pose), &pose);
            for k in 0..3 {
                assert!((back[k] - p[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn no_targets_no_detections() {
        let mut rng = substream(0, Stream::Perception);
        let p = SensorModelParams::default();
        let targets = [TargetState {
            id: 0,
            x: -20.0,
            y: 0.0,
        }];
        assert!(simulate_detections(&targets, &Pose::default(), &p, &mut rng).is_empty());
        assert!(simulate_detections(&[], &Pose::default(), &p, &mut rng).is_empty());
    }

    #[test]
    fn range_clip() {
        let mut rng = substream(0, Stream::Perception);
        let p = SensorModelParams::default();
        let far = [TargetState {
            id: 0,
            x: 36.0,
            y: 0.0,
        }];
        assert!(simulate_detections(&far, &Pose::default(), &p, &mut rng).is_empty());
        let near = [TargetState {
            id: 3,
            x: 20.0,
            y: 1.0,
        }];
        let d = simulate_detections(&near, &Pose::default(), &p, &mut rng);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].true_target_id, 3);
        assert!(d[0].range <= p.max_range);
    }

    #[test]
    fn localisation_noise_matches_sigma() {
        let mut rng = substream(5, Stream::Perception);
        let p = SensorModelParams::default();
        let target = [TargetState {
            id: 0,
            x: 10.0,
            y: 0.0,
        }];
        let n = 10_000;
        let (mut sx, mut sy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let d = simulate_detections(&target, &Pose::default(), &p, &mut rng);
            let (ex, ey) = (d[0].x - 10.0, d[0].y);
            sx += ex;
            sy += ey;
            sxx += ex * ex;
            syy += ey * ey;
        }
        let n = n as f64;
        let std_x = (sxx / n - (sx / n).powi(2)).sqrt();
        let std_y = (syy / n - (sy / n).powi(2)).sqrt();
        assert!((std_x - 0.12).abs() < 0.01, "{std_x}");
        assert!((std_y - 0.12).abs() < 0.01, "{std_y}");
        assert!((sx / n).abs() < 0.005 && (sy / n).abs() < 0.005);
    }

    #[test]
    fn miss_rate_one_drops_everything() {
        let mut rng = substream(0, Stream::Perception);
        let p = SensorModelParams {
            miss_rate: 1.0,
            ..Default::default()
        };
        let t = [TargetState {
            id: 0,
            x: 5.0,
            y: 0.0,
        }];
        assert!(simulate_detections(&t, &Pose::default(), &p, &mut rng).is_empty());
    }

    #[test]
    fn full_circle_fov() {
        let p = SensorModelParams {
            horizontal_fov: 2.0 * PI,
            ..Default::default()
        };
        assert!(in_fov(&Pose::default(), Point::new(-3.0, 0.0), &p));
    }
}
