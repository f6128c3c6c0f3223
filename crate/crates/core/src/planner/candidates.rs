//! Candidate path construction: a fan of heading changes, clipped to the map.

use crate::error::{Error, Result};
use crate::geometry::{Bounds, Point, Pose};
use crate::scenario::ScenarioConfig;

use super::trajectory::Trajectory;

/// Keeps sampled poses strictly inside the map.
const EDGE_MARGIN: f64 = 1e-6;

pub(crate) fn inset_bounds(cfg: &ScenarioConfig) -> Bounds {
    let b = cfg.map.bounds();
    Bounds {
        x0: b.x0 + EDGE_MARGIN,
        y0: b.y0 + EDGE_MARGIN,
        width: b.width - 2.0 * EDGE_MARGIN,
        height: b.height - 2.0 * EDGE_MARGIN,
    }
}

/// Five waypoints with the net heading change spread evenly over four legs.
fn fan_waypoints(start: Point, base: f64, change: f64, length: f64) -> [Point; 5] {
    let leg = length / 4.0;
    let mut pts = [start; 5];
    for k in 1..5 {
        let h = base + change * k as f64 / 4.0;
        pts[k] = Point::new(pts[k - 1].x + leg * h.cos(), pts[k - 1].y + leg * h.sin());
    }
    pts
}

/// In-bounds prefix of a polyline; `start` must be inside.
fn clip_polyline(points: &[Point], bounds: &Bounds) -> Vec<Point> {
    let mut out = vec![points[0]];
    for w in points.windows(2) {
        match bounds.exit_parameter(w[0], w[1]) {
            None => out.push(w[1]),
            Some(t) => {
                if t > 0.0 {
                    out.push(w[0].lerp(w[1], t));
                }
                break;
            }
        }
    }
    out
}

fn polyline_length(points: &[Point]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Five points evenly spaced by arc length along `points`.
fn resample5(points: &[Point]) -> [Point; 5] {
    let total = polyline_length(points);
    let mut out = [points[0]; 5];
    for (k, slot) in out.iter_mut().enumerate().skip(1) {
        let target = total * k as f64 / 4.0;
        let mut acc = 0.0;
        *slot = *points.last().unwrap();
        for w in points.windows(2) {
            let seg = w[0].distance(w[1]);
            if acc + seg >= target && seg > 0.0 {
                *slot = w[0].lerp(w[1], (target - acc) / seg);
                break;
            }
            acc += seg;
        }
    }
    out
}

/// Builds one clipped, refitted candidate.
pub(crate) fn build_candidate(
    start: &Pose,
    base_heading: f64,
    change: f64,
    length: f64,
    cfg: &ScenarioConfig,
) -> Trajectory {
    let bounds = inset_bounds(cfg);
    let speed = cfg.asv.speed;
    let dt = cfg.mission.dt;
    let raw = fan_waypoints(start.position(), base_heading, change, length);
    let clipped = clip_polyline(&raw, &bounds);
    let len = polyline_length(&clipped);
    if len == 0.0 {
        return Trajectory::stationary(*start, speed, dt);
    }
    let way = if clipped.len() == raw.len() && len == polyline_length(&raw) {
        raw
    } else {
        resample5(&clipped)
    };
    Trajectory::bezier(way, start.psi, speed, dt, change).clipped_to(&bounds)
}

/// The fan of candidate paths from `pose`.
///
/// Candidates that would be shorter than two steps because they run straight
/// into the map edge are rebuilt around the bearing to the map center, so a
/// vehicle cornered facing outward still gets a full fan.
pub fn candidate_paths(pose: &Pose, cfg: &ScenarioConfig) -> Result<Vec<Trajectory>> {
    candidate_paths_with_length(pose, cfg, cfg.asv.speed * cfg.mission.planning_horizon_s)
}

pub(crate) fn candidate_paths_with_length(
    pose: &Pose,
    cfg: &ScenarioConfig,
    length: f64,
) -> Result<Vec<Trajectory>> {
    if !cfg.map.bounds().contains(pose.position()) {
        return Err(Error::PoseOutsideMap {
            x: pose.x,
            y: pose.y,
        });
    }
    let min_len = (2.0 * cfg.asv.speed * cfg.mission.dt).min(length);
    let center = cfg.map.bounds().center();
    let to_center = (center.y - pose.y).atan2(center.x - pose.x);
    Ok(cfg
        .planner
        .heading_changes_deg
        .iter()
        .map(|deg| {
            let change = deg.to_radians();
            let t = build_candidate(pose, pose.psi, change, length, cfg);
            if t.arc_length >= min_len {
                t
            } else {
                let alt = build_candidate(pose, to_center, change, length, cfg);
                if alt.arc_length > t.arc_length {
                    alt
                } else {
                    t
                }
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_fan_has_seven_paths() {
        let cfg = ScenarioConfig::default();
        let c = candidate_paths(&Pose::new(50.0, 50.0, 0.0), &cfg).unwrap();
        assert_eq!(c.len(), 7);
        let straight = &c[3];
        assert_eq!(straight.heading_change, 0.0);
        assert!((straight.arc_length - 37.5).abs() < 1e-9);
        for t in &c {
            assert!((t.arc_length / t.duration_s - 1.5).abs() < 0.015);
            assert_eq!(t.samples[0].pose.position(), Point::new(50.0, 50.0));
            assert!(t.max_curvature <= cfg.planner.max_curvature);
        }
    }

    #[test]
    fn cornered_vehicle_gets_nonempty_candidates() {
        let cfg = ScenarioConfig::default();
        let pose = Pose::new(99.0, 99.0, std::f64::consts::FRAC_PI_4);
        let c = candidate_paths(&pose, &cfg).unwrap();
        assert_eq!(c.len(), 7);
        let b = cfg.map.bounds();
        for t in &c {
            assert!(!t.is_empty());
            // curved fits run slightly longer than their waypoint polyline
            assert!(t.arc_length <= 37.5 * 1.01);
            assert!(t.samples.iter().all(|s| b.contains(s.pose.position())));
        }
    }

    #[test]
    fn pose_outside_map_is_an_error() {
        let cfg = ScenarioConfig::default();
        assert!(matches!(
            candidate_paths(&Pose::new(-1.0, 5.0, 0.0), &cfg),
            Err(Error::PoseOutsideMap { .. })
        ));
    }

    #[test]
    fn clipping_stops_at_edge() {
        let b = Bounds {
            x0: 0.0,
            y0: 0.0,
            width: 10.0,
            height: 10.0,
        };
        let pts = [
            Point::new(5.0, 5.0),
            Point::new(8.0, 5.0),
            Point::new(12.0, 5.0),
        ];
        let c = clip_polyline(&pts, &b);
        assert_eq!(c.len(), 3);
        assert!((c[2].x - 10.0).abs() < 1e-12);
    }
}
