//! Analytic spatiotemporal prediction of target-position distributions.
//!
//! Every connected blob of occupied cells is treated as one target. Its
//! centroid is advected with the wind drift and spread by an anisotropic
//! Gaussian whose stds grow linearly with the horizon: `σ∥ = 0.5·γ·v_w·t`
//! along the wind and `σ⊥ = 0.2·γ·v_w·t` across it, or `σ = 0.1·t` in both
//! directions when the wind is calm. Kernels have unit peak, so the output
//! is an occupancy-like heatmap in `[0, 1]`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{drift, WindState};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mapping::{sigmoid, GridGeometry, OccupancyGrid};
use crate::rng::{substream, Stream};

pub const PARALLEL_COEFF: f64 = 0.5;
pub const PERPENDICULAR_COEFF: f64 = 0.2;
/// Isotropic spread rate under calm wind, m/s.
pub const CALM_SPREAD: f64 = 0.1;
/// Kernels are evaluated out to this many standard deviations; beyond it the
/// value is below 1e-13.
const TRUNCATE_SIGMAS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OverlapMode {
    /// Per-cell maximum over kernels.
    #[default]
    Max,
    /// Sum of kernels, clamped to 1.
    SumClamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    /// Wind speeds below this use the calm (isotropic) spread, m/s.
    pub calm_threshold: f64,
    pub overlap: OverlapMode,
    pub dataset_max_wind: f64,
    pub dataset_max_horizon_s: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            calm_threshold: 0.1,
            overlap: OverlapMode::Max,
            dataset_max_wind: 12.0,
            dataset_max_horizon_s: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryTargetGrid {
    pub geometry: GridGeometry,
    pub cells: Vec<u8>,
}

impl BinaryTargetGrid {
    pub fn empty(geometry: GridGeometry) -> Self {
        Self {
            geometry,
            cells: vec![0; geometry.len()],
        }
    }

    pub fn set(&mut self, ix: usize, iy: usize) {
        let idx = self.geometry.index(ix, iy);
        self.cells[idx] = 1;
    }

    pub fn count_ones(&self) -> usize {
        self.cells.iter().filter(|&&c| c == 1).count()
    }

    /// 8-connected components, each as a list of cell indices, in row-major
    /// order of their first cell.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let geo = self.geometry;
        let mut seen = vec![false; self.cells.len()];
        let mut out = Vec::new();
        for start in 0..self.cells.len() {
            if self.cells[start] == 0 || seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut comp = Vec::new();
            while let Some(idx) = stack.pop() {
                comp.push(idx);
                let (ix, iy) = geo.coords(idx);
                for dy in -1..=1i64 {
                    for dx in -1..=1i64 {
                        if let Some((nx, ny)) = geo.checked(ix as i64 + dx, iy as i64 + dy) {
                            let n = geo.index(nx, ny);
                            if self.cells[n] == 1 && !seen[n] {
                                seen[n] = true;
                                stack.push(n);
                            }
                        }
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Centroid (mean cell center) of every component.
    pub fn centroids(&self) -> Vec<Point> {
        self.components()
            .iter()
            .map(|comp| {
                let n = comp.len() as f64;
                let (sx, sy) = comp.iter().fold((0.0, 0.0), |(sx, sy), &idx| {
                    let (ix, iy) = self.geometry.coords(idx);
                    let c = self.geometry.cell_center(ix, iy);
                    (sx + c.x, sy + c.y)
                });
                Point::new(sx / n, sy / n)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictedGrid {
    pub geometry: GridGeometry,
    pub values: Vec<f64>,
    pub horizon_s: f64,
    pub wind: WindState,
}

impl PredictedGrid {
    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.geometry.index(ix, iy)]
    }
}

/// Cells with probability strictly above 0.5 become 1.
pub fn binarize(grid: &OccupancyGrid) -> BinaryTargetGrid {
    BinaryTargetGrid {
        geometry: grid.geometry,
        cells: grid
            .log_odds()
            .iter()
            .map(|&l| u8::from(sigmoid(l) > 0.5))
            .collect(),
    }
}

/// `(σ∥, σ⊥)` in meters for a horizon of `t` seconds.
pub fn kernel_sigmas(speed: f64, t: f64, gamma: f64, calm_threshold: f64) -> (f64, f64) {
    if speed < calm_threshold {
        (CALM_SPREAD * t, CALM_SPREAD * t)
    } else {
        (
            PARALLEL_COEFF * gamma * speed * t,
            PERPENDICULAR_COEFF * gamma * speed * t,
        )
    }
}

/// One rendered target: unit value in the cell containing `center`, Gaussian
/// falloff elsewhere.
#[derive(Debug, Clone, Copy)]
struct Kernel {
    center: Point,
    cos: f64,
    sin: f64,
    sigma_par: f64,
    sigma_perp: f64,
}

impl Kernel {
    fn render(&self, geo: &GridGeometry, values: &mut [f64], mode: OverlapMode) {
        let (cx, cy) = geo.cell_index_unbounded(self.center);
        let mut put = |idx: usize, v: f64| match mode {
            OverlapMode::Max => values[idx] = values[idx].max(v),
            OverlapMode::SumClamp => values[idx] = (values[idx] + v).min(1.0),
        };
        if self.sigma_par > 0.0 && self.sigma_perp > 0.0 {
            let reach = TRUNCATE_SIGMAS * self.sigma_par.max(self.sigma_perp);
            let lo =
                geo.cell_index_unbounded(Point::new(self.center.x - reach, self.center.y - reach));
            let hi =
                geo.cell_index_unbounded(Point::new(self.center.x + reach, self.center.y + reach));
            let inv_par = 1.0 / (self.sigma_par * self.sigma_par);
            let inv_perp = 1.0 / (self.sigma_perp * self.sigma_perp);
            for iy in lo.1.max(0)..=hi.1.min(geo.ny as i64 - 1) {
                for ix in lo.0.max(0)..=hi.0.min(geo.nx as i64 - 1) {
                    if ix == cx && iy == cy {
                        continue;
                    }
                    let c = geo.center_of(ix, iy);
                    let (dx, dy) = (c.x - self.center.x, c.y - self.center.y);
                    let along = dx * self.cos + dy * self.sin;
                    let across = -dx * self.sin + dy * self.cos;
                    let q = along * along * inv_par + across * across * inv_perp;
                    let v = (-0.5 * q).exp();
                    if v > 0.0 {
                        put(geo.index(ix as usize, iy as usize), v);
                    }
                }
            }
        }
        if let Some((ux, uy)) = geo.checked(cx, cy) {
            put(geo.index(ux, uy), 1.0);
        }
    }
}

/// Predicts target-position heatmaps `t` seconds ahead.
pub fn predict(
    k: &BinaryTargetGrid,
    wind: &WindState,
    t: f64,
    gamma: f64,
    cfg: &PredictorConfig,
) -> Result<PredictedGrid> {
    predict_from_centroids(&k.centroids(), k.geometry, wind, t, gamma, cfg)
}

/// Same as [`predict`] with the components already reduced to centroids.
pub fn predict_from_centroids(
    centroids: &[Point],
    geometry: GridGeometry,
    wind: &WindState,
    t: f64,
    gamma: f64,
    cfg: &PredictorConfig,
) -> Result<PredictedGrid> {
    if !(t >= 0.0) {
        return Err(Error::NegativeHorizon(t));
    }
    let mut values = vec![0.0; geometry.len()];
    let (sigma_par, sigma_perp) = kernel_sigmas(wind.speed, t, gamma, cfg.calm_threshold);
    let (dx, dy) = drift(wind, gamma, t);
    let (sin, cos) = wind.dir.sin_cos();
    for c in centroids {
        Kernel {
            center: Point::new(c.x + dx, c.y + dy),
            cos,
            sin,
            sigma_par,
            sigma_perp,
        }
        .render(&geometry, &mut values, cfg.overlap);
    }
    Ok(PredictedGrid {
        geometry,
        values,
        horizon_s: t,
        wind: *wind,
    })
}

/// One supervised training pair for an external network.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSample {
    pub input: BinaryTargetGrid,
    pub wind: WindState,
    pub horizon_s: f64,
    pub n_targets: usize,
    pub output: PredictedGrid,
}

/// Draws `n_samples` random binary grids (1–19 single-cell targets), winds
/// and horizons, and labels them with [`predict`].
pub fn generate_samples(
    geometry: GridGeometry,
    gamma: f64,
    cfg: &PredictorConfig,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<DatasetSample>> {
    if n_samples == 0 {
        return Err(Error::Empty("n_samples must be positive"));
    }
    let mut rng = substream(seed, Stream::Dataset);
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let n_targets = rng.random_range(1..=19usize).min(geometry.len());
        let mut input = BinaryTargetGrid::empty(geometry);
        let mut placed = 0;
        while placed < n_targets {
            let idx = rng.random_range(0..geometry.len());
            if input.cells[idx] == 0 {
                input.cells[idx] = 1;
                placed += 1;
            }
        }
        let speed = rng.random::<f64>() * cfg.dataset_max_wind;
        let dir = rng.random::<f64>() * std::f64::consts::TAU;
        let wind = WindState::new(speed, dir);
        let horizon_s = rng.random::<f64>() * cfg.dataset_max_horizon_s;
        let output = predict(&input, &wind, horizon_s, gamma, cfg)?;
        out.push(DatasetSample {
            input,
            wind,
            horizon_s,
            n_targets,
            output,
        });
    }
    Ok(out)
}

fn grid_csv<T: std::fmt::Display>(geo: &GridGeometry, values: &[T]) -> String {
    let mut s = String::new();
    for iy in 0..geo.ny {
        for ix in 0..geo.nx {
            if ix > 0 {
                s.push(',');
            }
            let _ = write!(s, "{}", values[geo.index(ix, iy)]);
        }
        s.push('\n');
    }
    s
}

/// Writes a dataset archive under `dir`:
///
/// ```text
/// dir/manifest.csv                # generator seed + one row per sample
/// dir/sample_00000/input.csv      # 0/1 grid, one line per row (y ascending)
/// dir/sample_00000/params.csv     # v_x,v_y,t
/// dir/sample_00000/output.csv     # predicted heatmap
/// ```
pub fn write_dataset(
    dir: &Path,
    geometry: GridGeometry,
    gamma: f64,
    cfg: &PredictorConfig,
    n_samples: usize,
    seed: u64,
) -> Result<PathBuf> {
    let samples = generate_samples(geometry, gamma, cfg, n_samples, seed)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = format!(
        "# seed={seed} samples={n_samples} nx={} ny={} cell_dx={} cell_dy={}\nsample,n_targets,v_x,v_y,t\n",
        geometry.nx, geometry.ny, geometry.cell_dx, geometry.cell_dy
    );
    for (i, s) in samples.iter().enumerate() {
        let name = format!("sample_{i:05}");
        let sdir = dir.join(&name);
        fs::create_dir_all(&sdir).map_err(|e| Error::io(&sdir, e))?;
        let (vx, vy) = s.wind.components();
        let write = |file: &str, text: String| {
            let p = sdir.join(file);
            fs::write(&p, text).map_err(|e| Error::io(p, e))
        };
        write("input.csv", grid_csv(&geometry, &s.input.cells))?;
        write(
            "params.csv",
            format!("v_x,v_y,t\n{vx},{vy},{}\n", s.horizon_s),
        )?;
        write("output.csv", grid_csv(&geometry, &s.output.values))?;
        let _ = writeln!(manifest, "{name},{},{vx},{vy},{}", s.n_targets, s.horizon_s);
    }
    let path = dir.join("manifest.csv");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
