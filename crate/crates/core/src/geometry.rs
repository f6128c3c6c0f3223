use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

/// A point in the local map frame (meters, x east, y north).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

/// Vehicle pose: position plus heading (radians, counter-clockwise from +x).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        Self {
            x,
            y,
            psi: wrap_angle(psi),
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Axis-aligned map rectangle `[x0, x0 + width] × [y0, y0 + height]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
}

impl Bounds {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x0
            && p.x <= self.x0 + self.width
            && p.y >= self.y0
            && p.y <= self.y0 + self.height
    }

    pub fn center(&self) -> Point {
        Point::new(self.x0 + 0.5 * self.width, self.y0 + 0.5 * self.height)
    }

    /// Parameter `t ∈ [0, 1]` at which the segment `a → b` first leaves the
    /// rectangle, or `None` if it stays inside. `a` must be inside.
    pub fn exit_parameter(&self, a: Point, b: Point) -> Option<f64> {
        if self.contains(b) {
            return None;
        }
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let mut t_exit = 1.0_f64;
        let mut clip = |origin: f64, delta: f64, lo: f64, hi: f64| {
            if delta > 0.0 {
                t_exit = t_exit.min((hi - origin) / delta);
            } else if delta < 0.0 {
                t_exit = t_exit.min((lo - origin) / delta);
            }
        };
        clip(a.x, dx, self.x0, self.x0 + self.width);
        clip(a.y, dy, self.y0, self.y0 + self.height);
        Some(t_exit.clamp(0.0, 1.0))
    }
}
