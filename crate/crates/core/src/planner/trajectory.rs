//! Constant-speed trajectories: a quartic Bézier through five waypoints, or
//! a polyline, resampled by arc length.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Bounds, Point, Pose};

/// Dense nodes per Bézier curve for arc-length lookup.
const DENSE_NODES: usize = 512;
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPose {
    pub t: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PathNode {
    s: f64,
    x: f64,
    y: f64,
    psi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Control waypoints the path was fitted through.
    pub waypoints: Vec<Point>,
    /// Poses every `dt` seconds, starting at `t = 0`.
    pub samples: Vec<TimedPose>,
    pub duration_s: f64,
    pub arc_length: f64,
    pub speed: f64,
    /// Net heading change of the candidate, radians.
    pub heading_change: f64,
    pub max_curvature: f64,
    /// Arc length at which each waypoint is passed.
    pub waypoint_arc: Vec<f64>,
    dt: f64,
    path: Vec<PathNode>,
}

fn bernstein4(u: f64) -> [f64; 5] {
    let v = 1.0 - u;
    [
        v * v * v * v,
        4.0 * u * v * v * v,
        6.0 * u * u * v * v,
        4.0 * u * u * u * v,
        u * u * u * u,
    ]
}

/// First and second derivatives of a quartic Bézier at `u`.
fn derivatives(p: &[Point; 5], u: f64) -> (Point, Point) {
    let v = 1.0 - u;
    let d: Vec<Point> = (0..4)
        .map(|i| Point::new(4.0 * (p[i + 1].x - p[i].x), 4.0 * (p[i + 1].y - p[i].y)))
        .collect();
    let b3 = [v * v * v, 3.0 * u * v * v, 3.0 * u * u * v, u * u * u];
    let first = (0..4).fold(Point::default(), |acc, i| {
        Point::new(acc.x + b3[i] * d[i].x, acc.y + b3[i] * d[i].y)
    });
    let dd: Vec<Point> = (0..3)
        .map(|i| Point::new(3.0 * (d[i + 1].x - d[i].x), 3.0 * (d[i + 1].y - d[i].y)))
        .collect();
    let b2 = [v * v, 2.0 * u * v, u * u];
    let second = (0..3).fold(Point::default(), |acc, i| {
        Point::new(acc.x + b2[i] * dd[i].x, acc.y + b2[i] * dd[i].y)
    });
    (first, second)
}

fn eval(p: &[Point; 5], u: f64) -> Point {
    let b = bernstein4(u);
    p.iter().zip(b).fold(Point::default(), |acc, (c, w)| {
        Point::new(acc.x + w * c.x, acc.y + w * c.y)
    })
}

/// Chord-length parameters of a point sequence, in [0, 1].
fn chord_params(points: &[Point]) -> Vec<f64> {
    let mut acc = vec![0.0];
    for w in points.windows(2) {
        let last = *acc.last().unwrap();
        acc.push(last + w[0].distance(w[1]));
    }
    let total = *acc.last().unwrap();
    if total == 0.0 {
        return (0..points.len())
            .map(|i| i as f64 / (points.len() - 1).max(1) as f64)
            .collect();
    }
    acc.iter().map(|s| s / total).collect()
}

/// Control points of the quartic interpolating `w` at chord-length
/// parameters, with the end points pinned. `None` if the system is singular.
pub fn fit_quartic(w: &[Point; 5]) -> Option<[Point; 5]> {
    let u = chord_params(w);
    let mut a = Matrix3::zeros();
    let mut bx = Vector3::zeros();
    let mut by = Vector3::zeros();
    for k in 1..4 {
        let b = bernstein4(u[k]);
        for j in 1..4 {
            a[(k - 1, j - 1)] = b[j];
        }
        bx[k - 1] = w[k].x - b[0] * w[0].x - b[4] * w[4].x;
        by[k - 1] = w[k].y - b[0] * w[0].y - b[4] * w[4].y;
    }
    let lu = a.lu();
    let cx = lu.solve(&bx)?;
    let cy = lu.solve(&by)?;
    if cx.iter().chain(cy.iter()).any(|v| !v.is_finite()) {
        return None;
    }
    Some([
        w[0],
        Point::new(cx[0], cy[0]),
        Point::new(cx[1], cy[1]),
        Point::new(cx[2], cy[2]),
        w[4],
    ])
}

fn heading(from: Point, to: Point, fallback: f64) -> f64 {
    let (dx, dy) = (to.x - from.x, to.y - from.y);
    if dx == 0.0 && dy == 0.0 {
        fallback
    } else {
        dy.atan2(dx)
    }
}

impl Trajectory {
    /// A zero-length trajectory holding `pose`.
    pub fn stationary(pose: Pose, speed: f64, dt: f64) -> Self {
        let node = PathNode {
            s: 0.0,
            x: pose.x,
            y: pose.y,
            psi: pose.psi,
        };
        Self::from_nodes(
            vec![pose.position()],
            vec![node],
            vec![0.0],
            speed,
            dt,
            0.0,
            0.0,
        )
    }

    /// Quartic Bézier interpolating five waypoints; falls back to the
    /// polyline when the fit is degenerate.
    pub fn bezier(
        waypoints: [Point; 5],
        start_psi: f64,
        speed: f64,
        dt: f64,
        heading_change: f64,
    ) -> Self {
        let Some(ctrl) = fit_quartic(&waypoints) else {
            let mut t = Self::polyline(&waypoints, start_psi, speed, dt);
            t.heading_change = heading_change;
            return t;
        };
        let u_way = chord_params(&waypoints);
        let mut nodes = Vec::with_capacity(DENSE_NODES + 1);
        let mut max_curv: f64 = 0.0;
        let mut prev = waypoints[0];
        let mut s = 0.0;
        for i in 0..=DENSE_NODES {
            let u = i as f64 / DENSE_NODES as f64;
            let p = if i == 0 { waypoints[0] } else { eval(&ctrl, u) };
            s += prev.distance(p);
            prev = p;
            let (d1, d2) = derivatives(&ctrl, u);
            let norm = d1.x.hypot(d1.y);
            let psi = if norm > 1e-12 {
                d1.y.atan2(d1.x)
            } else {
                nodes.last().map_or(start_psi, |n: &PathNode| n.psi)
            };
            if norm > 1e-9 {
                max_curv = max_curv.max((d1.x * d2.y - d1.y * d2.x).abs() / norm.powi(3));
            }
            nodes.push(PathNode {
                s,
                x: p.x,
                y: p.y,
                psi,
            });
        }
        let waypoint_arc = u_way
            .iter()
            .map(|&u| {
                let f = u * DENSE_NODES as f64;
                let i = (f.floor() as usize).min(DENSE_NODES - 1);
                let frac = f - i as f64;
                nodes[i].s + frac * (nodes[i + 1].s - nodes[i].s)
            })
            .collect();
        Self::from_nodes(
            waypoints.to_vec(),
            nodes,
            waypoint_arc,
            speed,
            dt,
            heading_change,
            max_curv,
        )
    }

    /// Piecewise-linear path through `points`.
    pub fn polyline(points: &[Point], start_psi: f64, speed: f64, dt: f64) -> Self {
        assert!(!points.is_empty(), "polyline needs at least one point");
        let mut nodes = Vec::with_capacity(points.len());
        let mut arcs = Vec::with_capacity(points.len());
        let mut s = 0.0;
        let mut psi = start_psi;
        for (i, p) in points.iter().enumerate() {
            if i > 0 {
                s += points[i - 1].distance(*p);
            }
            if let Some(next) = points.get(i + 1) {
                psi = heading(*p, *next, psi);
            }
            nodes.push(PathNode {
                s,
                x: p.x,
                y: p.y,
                psi,
            });
            arcs.push(s);
        }
        Self::from_nodes(points.to_vec(), nodes, arcs, speed, dt, 0.0, 0.0)
    }

    fn from_nodes(
        waypoints: Vec<Point>,
        path: Vec<PathNode>,
        waypoint_arc: Vec<f64>,
        speed: f64,
        dt: f64,
        heading_change: f64,
        max_curvature: f64,
    ) -> Self {
        let arc_length = path.last().map_or(0.0, |n| n.s);
        let duration_s = arc_length / speed;
        let mut t = Self {
            waypoints,
            samples: Vec::new(),
            duration_s,
            arc_length,
            speed,
            heading_change,
            max_curvature,
            waypoint_arc,
            dt,
            path,
        };
        let n = (duration_s / dt + TIME_EPS).floor() as usize;
        t.samples = (0..=n)
            .map(|k| {
                let time = k as f64 * dt;
                TimedPose {
                    t: time,
                    pose: t.pose_at_arc(speed * time),
                }
            })
            .collect();
        t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn is_empty(&self) -> bool {
        self.samples.len() <= 1
    }

    pub fn start_pose(&self) -> Pose {
        self.pose_at_arc(0.0)
    }

    pub fn end_pose(&self) -> Pose {
        self.pose_at_arc(self.arc_length)
    }

    fn pose_at_arc(&self, s: f64) -> Pose {
        let path = &self.path;
        if s <= 0.0 || path.len() == 1 {
            let n = path[0];
            return Pose::new(n.x, n.y, n.psi);
        }
        let last = path[path.len() - 1];
        if s >= last.s {
            return Pose::new(last.x, last.y, last.psi);
        }
        let i = path.partition_point(|n| n.s <= s).max(1);
        let (a, b) = (path[i - 1], path[i]);
        let seg = b.s - a.s;
        let f = if seg > 0.0 { (s - a.s) / seg } else { 0.0 };
        let psi = a.psi + f * wrap_angle(b.psi - a.psi);
        Pose::new(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y), psi)
    }

    /// Pose `elapsed_s` seconds after the start, and whether the trajectory
    /// is complete. Times past the end clamp to the final pose.
    pub fn pose_at(&self, elapsed_s: f64) -> (Pose, bool) {
        let done = elapsed_s >= self.duration_s - TIME_EPS;
        (self.pose_at_arc(self.speed * elapsed_s.max(0.0)), done)
    }

    /// Prefix of this trajectory up to arc length `s_max`.
    pub fn truncated(&self, s_max: f64) -> Self {
        if s_max >= self.arc_length {
            return self.clone();
        }
        let s_max = s_max.max(0.0);
        let mut nodes: Vec<PathNode> = self.path.iter().copied().filter(|n| n.s < s_max).collect();
        let end = self.pose_at_arc(s_max);
        nodes.push(PathNode {
            s: s_max,
            x: end.x,
            y: end.y,
            psi: end.psi,
        });
        let arcs: Vec<f64> = self.waypoint_arc.iter().map(|a| a.min(s_max)).collect();
        Self::from_nodes(
            self.waypoints.clone(),
            nodes,
            arcs,
            self.speed,
            self.dt,
            self.heading_change,
            self.max_curvature,
        )
    }

    /// Arc length of the first dense node outside `bounds`, if any.
    pub fn first_exit(&self, bounds: &Bounds) -> Option<f64> {
        self.path
            .iter()
            .find(|n| !bounds.contains(Point::new(n.x, n.y)))
            .map(|n| n.s)
    }

    /// Truncates just before the path first leaves `bounds`.
    pub fn clipped_to(&self, bounds: &Bounds) -> Self {
        match self.first_exit(bounds) {
            None => self.clone(),
            Some(s_out) => {
                let i = self.path.partition_point(|n| n.s < s_out);
                let s_in = if i == 0 { 0.0 } else { self.path[i - 1].s };
                self.truncated(s_in)
            }
        }
    }

    /// `(t, pose)` at each multiple of `interval` up to the duration.
    pub fn poses_every(&self, interval: f64) -> Vec<TimedPose> {
        let n = (self.duration_s / interval + TIME_EPS).floor() as usize;
        (1..=n)
            .map(|k| {
                let t = k as f64 * interval;
                TimedPose {
                    t,
                    pose: self.pose_at(t).0,
                }
            })
            .collect()
    }
}
