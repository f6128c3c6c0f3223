//! Dynamic occupancy grid.
//!
//! Each mapping step has two phases:
//!
//! 1. **Estimation** — detections raise the log-odds of cells under a
//!    range-scaled Gaussian kernel (positive inverse sensor model); every
//!    other cell in the field of view is lowered by the negative model.
//! 2. **Prediction** — the occupied part of the map is shifted downwind by
//!    whole cells. Sub-cell drift accumulates in a residual until it rounds
//!    to a shift, and shifted cells are blended with their previous value.
//!
//! Probabilities are clamped to `[p_low, p_high]` so that old evidence can
//! always be overturned as targets move.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::environment::{drift, WindState};
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Point, Pose};
use crate::perception::{in_fov, localization_sigma, Detection, SensorModelParams};
use crate::scenario::{MapConfig, ScenarioConfig};

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn sigmoid(l: f64) -> f64 {
    1.0 / (1.0 + (-l).exp())
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    let h = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    h(p) + h(1.0 - p)
}

/// Cell layout shared by occupancy, binary and predicted grids.
/// Cells are stored row-major with `ix` along x and `iy` along y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub nx: usize,
    pub ny: usize,
    pub cell_dx: f64,
    pub cell_dy: f64,
    pub origin_x: f64,
    pub origin_y: f64,
}

impl GridGeometry {
    pub fn new(nx: usize, ny: usize, cell_dx: f64, cell_dy: f64) -> Self {
        Self {
            nx,
            ny,
            cell_dx,
            cell_dy,
            origin_x: 0.0,
            origin_y: 0.0,
        }
    }

    pub fn from_map(map: &MapConfig) -> Self {
        Self {
            nx: map.nx(),
            ny: map.ny(),
            cell_dx: map.cell_dx,
            cell_dy: map.cell_dy,
            origin_x: map.origin_x,
            origin_y: map.origin_y,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn cell_center(&self, ix: usize, iy: usize) -> Point {
        self.center_of(ix as i64, iy as i64)
    }

    /// Center of a possibly out-of-range cell.
    #[inline]
    pub fn center_of(&self, ix: i64, iy: i64) -> Point {
        Point::new(
            self.origin_x + (ix as f64 + 0.5) * self.cell_dx,
            self.origin_y + (iy as f64 + 0.5) * self.cell_dy,
        )
    }

    /// Signed cell indices of the cell containing `p` (unbounded).
    #[inline]
    pub fn cell_index_unbounded(&self, p: Point) -> (i64, i64) {
        (
            ((p.x - self.origin_x) / self.cell_dx).floor() as i64,
            ((p.y - self.origin_y) / self.cell_dy).floor() as i64,
        )
    }

    /// Cell containing `p`; the far map edges belong to the last row/column.
    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        let (mut ix, mut iy) = self.cell_index_unbounded(p);
        let x_max = self.origin_x + self.nx as f64 * self.cell_dx;
        let y_max = self.origin_y + self.ny as f64 * self.cell_dy;
        if ix == self.nx as i64 && p.x <= x_max {
            ix -= 1;
        }
        if iy == self.ny as i64 && p.y <= y_max {
            iy -= 1;
        }
        self.checked(ix, iy)
    }

    #[inline]
    pub fn checked(&self, ix: i64, iy: i64) -> Option<(usize, usize)> {
        (ix >= 0 && iy >= 0 && (ix as usize) < self.nx && (iy as usize) < self.ny)
            .then_some((ix as usize, iy as usize))
    }

    /// Indices of all cells whose centers lie in the sensor fov of `pose`,
    /// in row-major order.
    pub fn fov_cells(&self, pose: &Pose, params: &SensorModelParams) -> Vec<usize> {
        let (lo, hi) = sector_box(pose, params);
        let lo = self.cell_index_unbounded(lo);
        let hi = self.cell_index_unbounded(hi);
        let ix0 = lo.0.max(0);
        let iy0 = lo.1.max(0);
        let ix1 = hi.0.min(self.nx as i64 - 1);
        let iy1 = hi.1.min(self.ny as i64 - 1);
        // Cheap dot-product classification; cells near either boundary fall
        // back to the exact `in_fov` test.
        let half = 0.5 * params.horizontal_fov;
        let cos_half = half.cos();
        let (sin_psi, cos_psi) = pose.psi.sin_cos();
        let r_max = params.max_range;
        let band = 1e-7 * r_max.max(1.0);
        let mut out = Vec::new();
        for iy in iy0..=iy1 {
            for ix in ix0..=ix1 {
                let c = self.center_of(ix, iy);
                let (dx, dy) = (c.x - pose.x, c.y - pose.y);
                let r = (dx * dx + dy * dy).sqrt();
                let inside = if (r - r_max).abs() < band || r < band || half >= std::f64::consts::PI
                {
                    in_fov(pose, c, params)
                } else if r > r_max {
                    false
                } else {
                    let cb = (dx * cos_psi + dy * sin_psi) / r;
                    if cb > cos_half + 1e-7 {
                        true
                    } else if cb < cos_half - 1e-7 {
                        false
                    } else {
                        in_fov(pose, c, params)
                    }
                };
                if inside {
                    out.push(self.index(ix as usize, iy as usize));
                }
            }
        }
        out
    }
}

/// Axis-aligned box around the fov sector, padded by one cell-width worth
/// of slack so boundary cells are never cut.
fn sector_box(pose: &Pose, params: &SensorModelParams) -> (Point, Point) {
    let r = params.max_range;
    let half = 0.5 * params.horizontal_fov;
    if half >= std::f64::consts::FRAC_PI_2 {
        return (
            Point::new(pose.x - r, pose.y - r),
            Point::new(pose.x + r, pose.y + r),
        );
    }
    let mut xs = vec![pose.x];
    let mut ys = vec![pose.y];
    let mut push = |a: f64| {
        xs.push(pose.x + r * a.cos());
        ys.push(pose.y + r * a.sin());
    };
    push(pose.psi - half);
    push(pose.psi + half);
    for k in 0..4 {
        let axis = k as f64 * std::f64::consts::FRAC_PI_2;
        if wrap_angle(axis - pose.psi).abs() <= half {
            push(axis);
        }
    }
    let pad = 1.0;
    let fold = |v: &[f64], f: fn(f64, f64) -> f64, init: f64| v.iter().copied().fold(init, f);
    (
        Point::new(
            fold(&xs, f64::min, f64::INFINITY) - pad,
            fold(&ys, f64::min, f64::INFINITY) - pad,
        ),
        Point::new(
            fold(&xs, f64::max, f64::NEG_INFINITY) + pad,
            fold(&ys, f64::max, f64::NEG_INFINITY) + pad,
        ),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub geometry: GridGeometry,
    log_odds: Vec<f64>,
    /// Accumulated sub-cell drift `(R_x, R_y)` in cells.
    residual: (f64, f64),
    p_low: f64,
    p_high: f64,
    l_low: f64,
    l_high: f64,
}

/// Parameters of the prediction (drift) step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionParams {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl PredictionParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            gamma: cfg.wind.gamma,
            alpha: cfg.mapping.alpha,
            beta: cfg.mapping.beta,
        }
    }
}

impl OccupancyGrid {
    /// A grid with every cell at p = 0.5.
    pub fn new(geometry: GridGeometry, p_low: f64, p_high: f64) -> Self {
        Self {
            geometry,
            log_odds: vec![0.0; geometry.len()],
            residual: (0.0, 0.0),
            p_low,
            p_high,
            l_low: logit(p_low),
            l_high: logit(p_high),
        }
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self::new(
            GridGeometry::from_map(&cfg.map),
            cfg.mapping.p_low,
            cfg.mapping.p_high,
        )
    }

    /// Builds a grid from explicit probabilities (clamped).
    pub fn from_probabilities(
        geometry: GridGeometry,
        probs: &[f64],
        p_low: f64,
        p_high: f64,
    ) -> Result<Self> {
        if probs.len() != geometry.len() {
            return Err(Error::Geometry(format!(
                "{} probabilities for a {}x{} grid",
                probs.len(),
                geometry.nx,
                geometry.ny
            )));
        }
        let mut g = Self::new(geometry, p_low, p_high);
        for (l, &p) in g.log_odds.iter_mut().zip(probs) {
            *l = logit(p);
        }
        for i in 0..g.log_odds.len() {
            g.clamp_cell(i);
        }
        Ok(g)
    }

    pub fn p_low(&self) -> f64 {
        self.p_low
    }

    pub fn p_high(&self) -> f64 {
        self.p_high
    }

    pub fn residual(&self) -> (f64, f64) {
        self.residual
    }

    pub fn log_odds(&self) -> &[f64] {
        &self.log_odds
    }

    #[inline]
    pub fn probability_at(&self, idx: usize) -> f64 {
        sigmoid(self.log_odds[idx])
    }

    pub fn probability(&self, ix: usize, iy: usize) -> f64 {
        self.probability_at(self.geometry.index(ix, iy))
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.log_odds.iter().map(|&l| sigmoid(l)).collect()
    }

    #[inline]
    fn clamp_cell(&mut self, idx: usize) {
        let l = &mut self.log_odds[idx];
        *l = l.clamp(self.l_low, self.l_high);
    }

    #[inline]
    pub(crate) fn add_log_odds(&mut self, idx: usize, delta: f64) {
        self.log_odds[idx] += delta;
    }

    pub(crate) fn set_probability(&mut self, idx: usize, p: f64) {
        self.log_odds[idx] = logit(p);
        self.clamp_cell(idx);
    }

    pub(crate) fn clamp_cells(&mut self, cells: impl IntoIterator<Item = usize>) {
        for idx in cells {
            self.clamp_cell(idx);
        }
    }

    /// Order-sensitive digest of the cell state and residuals.
    pub fn checksum(&self) -> u64 {
        // FNV-1a over the raw bits
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100_0000_01b3);
            }
        };
        for l in &self.log_odds {
            mix(l.to_bits());
        }
        mix(self.residual.0.to_bits());
        mix(self.residual.1.to_bits());
        h
    }
}

/// Positive inverse sensor model: occupancy probability of a cell at
/// `cell_dist` from a detection observed at range `r`.
pub fn positive_sensor_model(r: f64, cell_dist: f64, params: &SensorModelParams) -> f64 {
    let confidence = 1.0 / (1.0 + (params.a * (r - params.d)).exp());
    let sigma = localization_sigma(r);
    if sigma == 0.0 {
        return if cell_dist == 0.0 { confidence } else { 0.0 };
    }
    confidence * (-cell_dist * cell_dist / (2.0 * sigma * sigma)).exp()
}

/// Negative inverse sensor model for an unoccupied fov cell at range `r`.
pub fn negative_sensor_model(r: f64, params: &SensorModelParams) -> f64 {
    1.0 / (1.0 + (params.a_prime * (r - params.d_prime)).exp())
}

/// Estimation step: fuse `detections` observed from `pose` into the grid.
///
/// Each detection is snapped to the center of its nearest cell; cells whose
/// positive-model value exceeds `p_low` are raised. Overlapping kernels are
/// applied sequentially in detection order. Remaining fov cells receive the
/// negative model. Errors, without modifying the grid, if any detection lies
/// outside the fov of `pose`.
pub fn update_estimation(
    grid: &mut OccupancyGrid,
    detections: &[Detection],
    pose: &Pose,
    params: &SensorModelParams,
) -> Result<()> {
    if let Some(d) = detections
        .iter()
        .find(|d| !in_fov(pose, d.position(), params))
    {
        return Err(Error::DetectionOutsideFov { x: d.x, y: d.y });
    }
    let geo = grid.geometry;
    let p_low = grid.p_low;
    let mut occupied = vec![false; geo.len()];
    let mut touched = Vec::new();

    for d in detections {
        let r = d.range;
        let confidence = positive_sensor_model(r, 0.0, params);
        if confidence <= p_low {
            continue;
        }
        let sigma = localization_sigma(r);
        let support = sigma * (2.0 * (confidence / p_low).ln()).sqrt();
        let (cx, cy) = geo.cell_index_unbounded(d.position());
        let center = geo.center_of(cx, cy);
        let wx = (support / geo.cell_dx).ceil() as i64;
        let wy = (support / geo.cell_dy).ceil() as i64;
        for iy in cy - wy..=cy + wy {
            for ix in cx - wx..=cx + wx {
                let Some((ux, uy)) = geo.checked(ix, iy) else {
                    continue;
                };
                let dist = geo.center_of(ix, iy).distance(center);
                let p = positive_sensor_model(r, dist, params);
                if p > p_low {
                    let idx = geo.index(ux, uy);
                    grid.add_log_odds(idx, logit(p));
                    if !occupied[idx] {
                        occupied[idx] = true;
                        touched.push(idx);
                    }
                }
            }
        }
    }

    for idx in geo.fov_cells(pose, params) {
        if occupied[idx] {
            continue;
        }
        let (ix, iy) = geo.coords(idx);
        let r = geo.cell_center(ix, iy).distance(pose.position());
        grid.add_log_odds(idx, logit(negative_sensor_model(r, params)));
        touched.push(idx);
    }
    grid.clamp_cells(touched);
    Ok(())
}

/// Prediction step: shift the occupied part of the map by the accumulated
/// wind drift. Shift sources outside the map read as `p_low`.
pub fn update_prediction(
    grid: &mut OccupancyGrid,
    wind: &WindState,
    dt: f64,
    params: &PredictionParams,
) {
    let geo = grid.geometry;
    let (dx, dy) = drift(wind, params.gamma, dt);
    let mut rx = grid.residual.0 + dx / geo.cell_dx;
    let mut ry = grid.residual.1 + dy / geo.cell_dy;
    // round half down keeps the residual in (−0.5, 0.5]
    let sx = (rx - 0.5).ceil();
    let sy = (ry - 0.5).ceil();
    rx -= sx;
    ry -= sy;
    grid.residual = (rx, ry);
    let (sx, sy) = (sx as i64, sy as i64);
    if sx == 0 && sy == 0 {
        return;
    }

    // Only cells that are occupied, or receive an occupied source, can see
    // a filtered value that differs from their own.
    let p_low = grid.p_low;
    let occupied: Vec<(usize, f64)> = grid
        .log_odds
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 0.0 && sigmoid(l) > 0.5)
        .map(|(i, &l)| (i, sigmoid(l)))
        .collect();
    if occupied.is_empty() {
        return;
    }
    let filtered = |idx: usize| match occupied.binary_search_by_key(&idx, |&(i, _)| i) {
        Ok(k) => occupied[k].1,
        Err(_) => p_low,
    };
    let mut dests: Vec<usize> = Vec::with_capacity(2 * occupied.len());
    for &(i, _) in &occupied {
        dests.push(i);
        let (ix, iy) = geo.coords(i);
        if let Some((x, y)) = geo.checked(ix as i64 + sx, iy as i64 + sy) {
            dests.push(geo.index(x, y));
        }
    }
    dests.sort_unstable();
    dests.dedup();
    let updates: Vec<(usize, f64)> = dests
        .into_iter()
        .filter_map(|idx| {
            let (ix, iy) = geo.coords(idx);
            let src = match geo.checked(ix as i64 - sx, iy as i64 - sy) {
                Some((x, y)) => filtered(geo.index(x, y)),
                None => p_low,
            };
            (filtered(idx) != src).then(|| {
                (
                    idx,
                    params.alpha * src + params.beta * sigmoid(grid.log_odds[idx]),
                )
            })
        })
        .collect();
    for (idx, p) in updates {
        grid.set_probability(idx, p);
    }
}

/// Mean binary entropy of the grid, in bits.
pub fn mean_entropy(grid: &OccupancyGrid) -> f64 {
    if grid.log_odds.is_empty() {
        return 0.0;
    }
    let sum: f64 = grid
        .log_odds
        .iter()
        .map(|&l| binary_entropy(sigmoid(l)))
        .sum();
    sum / grid.log_odds.len() as f64
}

/// Portable graymap (P2) of the probabilities, scaled to 0–255. The first
/// image row is the top (largest y) of the map.
pub fn to_pgm(grid: &OccupancyGrid) -> String {
    let geo = grid.geometry;
    let mut out = format!("P2\n{} {}\n255\n", geo.nx, geo.ny);
    for iy in (0..geo.ny).rev() {
        let row: Vec<String> = (0..geo.nx)
            .map(|ix| {
                let v = (grid.probability(ix, iy) * 255.0).round() as u8;
                v.to_string()
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// One-line metadata written next to a P2 snapshot.
pub fn snapshot_meta_line(grid: &OccupancyGrid, t: f64) -> String {
    let g = grid.geometry;
    format!(
        "origin_x={} origin_y={} cell_dx={} cell_dy={} nx={} ny={} t={}\n",
        g.origin_x, g.origin_y, g.cell_dx, g.cell_dy, g.nx, g.ny, t
    )
}

/// CSV of raw cell probabilities, one line per `iy` (ascending), `nx` columns.
pub fn write_probability_csv(geometry: &GridGeometry, probs: &[f64]) -> String {
    let mut out = String::with_capacity(probs.len() * 20);
    for iy in 0..geometry.ny {
        for ix in 0..geometry.nx {
            if ix > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", probs[geometry.index(ix, iy)]);
        }
        out.push('\n');
    }
    out
}

/// Parses a CSV written by [`write_probability_csv`]. Returns `(nx, ny, values)`.
pub fn read_probability_csv(text: &str) -> Result<(usize, usize, Vec<f64>)> {
    let mut values = Vec::new();
    let mut nx = None;
    let mut ny = 0;
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Csv {
                line: line_no + 1,
                msg: e.to_string(),
            })?;
        match nx {
            None => nx = Some(row.len()),
            Some(n) if n != row.len() => {
                return Err(Error::Csv {
                    line: line_no + 1,
                    msg: format!("expected {n} columns, found {}", row.len()),
                })
            }
            _ => {}
        }
        values.extend(row);
        ny += 1;
    }
    Ok((nx.unwrap_or(0), ny, values))
}
