//! Evaluation metrics: map entropy, filtered MSE against ground truth and
//! mean detections, plus Monte-Carlo aggregation.

use serde::{Deserialize, Serialize};

use crate::environment::TargetState;
use crate::error::{Error, Result};
use crate::mapping::{GridGeometry, OccupancyGrid};

/// Binary map of true target cells at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthGrid {
    pub geometry: GridGeometry,
    pub cells: Vec<u8>,
}

impl GroundTruthGrid {
    pub fn empty(geometry: GridGeometry) -> Self {
        Self {
            geometry,
            cells: vec![0; geometry.len()],
        }
    }

    /// Marks the cell of every target still on the map.
    pub fn from_targets(geometry: GridGeometry, targets: &[TargetState]) -> Self {
        let mut g = Self::empty(geometry);
        for t in targets {
            if let Some((ix, iy)) = geometry.cell_of(t.position()) {
                g.cells[geometry.index(ix, iy)] = 1;
            }
        }
        g
    }

    pub fn count_ones(&self) -> usize {
        self.cells.iter().filter(|&&c| c == 1).count()
    }
}

/// Unit-peak 1-D Gaussian taps for offsets `-r..=r`.
fn gaussian_taps(sigma: f64, truncate: f64) -> Vec<f64> {
    let r = (truncate * sigma).floor() as i64;
    (-r..=r)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect()
}

/// `G ⊛ Y` with a separable unit-peak Gaussian, zero padding outside the map.
pub fn smooth_truth(truth: &GroundTruthGrid, sigma_g: f64, truncate: f64) -> Vec<f64> {
    let geo = truth.geometry;
    let (nx, ny) = (geo.nx, geo.ny);
    let taps = gaussian_taps(sigma_g, truncate);
    let r = (taps.len() / 2) as i64;
    let mut out = vec![0.0; geo.len()];
    // truth is sparse: stamp the 2-D kernel around each 1-cell
    for (idx, _) in truth.cells.iter().enumerate().filter(|(_, &c)| c == 1) {
        let (cx, cy) = geo.coords(idx);
        for (j, wy) in taps.iter().enumerate() {
            let y = cy as i64 + j as i64 - r;
            if y < 0 || y >= ny as i64 {
                continue;
            }
            for (i, wx) in taps.iter().enumerate() {
                let x = cx as i64 + i as i64 - r;
                if x < 0 || x >= nx as i64 {
                    continue;
                }
                out[y as usize * nx + x as usize] += wx * wy;
            }
        }
    }
    out
}

/// Mean squared error between map probabilities and the smoothed truth.
pub fn mse(
    grid: &OccupancyGrid,
    truth: &GroundTruthGrid,
    sigma_g: f64,
    truncate: f64,
) -> Result<f64> {
    if grid.geometry != truth.geometry {
        return Err(Error::Geometry(format!(
            "map is {}x{}, truth is {}x{}",
            grid.geometry.nx, grid.geometry.ny, truth.geometry.nx, truth.geometry.ny
        )));
    }
    let target = smooth_truth(truth, sigma_g, truncate);
    let n = target.len();
    let sum: f64 = (0..n)
        .map(|i| {
            let d = grid.probability_at(i) - target[i];
            d * d
        })
        .sum();
    Ok(sum / n as f64)
}

/// Cumulative detections divided by elapsed steps.
pub fn mean_detections(history: &[usize]) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::Empty("detection history"));
    }
    Ok(history.iter().sum::<usize>() as f64 / history.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub t: f64,
    /// Mean map entropy, bits.
    pub entropy: f64,
    pub mse: f64,
    pub n_detections_step: usize,
    pub mean_detections: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

impl MeanStd {
    /// Order-independent: values are sorted before summation.
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n == 0 {
            return Self::default();
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
            dev.sort_by(f64::total_cmp);
            (dev.iter().sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: f64,
    pub entropy: MeanStd,
    pub mse: MeanStd,
    pub mean_detections: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_trials: usize,
    pub final_entropy: MeanStd,
    pub final_mse: MeanStd,
    pub final_mean_detections: MeanStd,
    /// Mission-averaged MSE per trial, then aggregated.
    pub mission_mse: MeanStd,
    pub curves: Vec<CurvePoint>,
}

/// Aggregates per-trial metric series. Curves run to the shortest series.
pub fn aggregate<S: AsRef<[MetricSample]>>(trials: &[S]) -> Result<Summary> {
    if trials.is_empty() {
        return Err(Error::Empty("trials"));
    }
    if trials.iter().any(|t| t.as_ref().is_empty()) {
        return Err(Error::Empty("metric series"));
    }
    let last = |f: fn(&MetricSample) -> f64| -> MeanStd {
        let v: Vec<f64> = trials
            .iter()
            .map(|t| f(t.as_ref().last().unwrap()))
            .collect();
        MeanStd::of(&v)
    };
    let mission: Vec<f64> = trials
        .iter()
        .map(|t| {
            let s = t.as_ref();
            s.iter().map(|m| m.mse).sum::<f64>() / s.len() as f64
        })
        .collect();
    let len = trials.iter().map(|t| t.as_ref().len()).min().unwrap_or(0);
    let curves = (0..len)
        .map(|k| {
            let col = |f: fn(&MetricSample) -> f64| -> MeanStd {
                let v: Vec<f64> = trials.iter().map(|t| f(&t.as_ref()[k])).collect();
                MeanStd::of(&v)
            };
            CurvePoint {
                t: trials[0].as_ref()[k].t,
                entropy: col(|m| m.entropy),
                mse: col(|m| m.mse),
                mean_detections: col(|m| m.mean_detections),
            }
        })
        .collect();
    Ok(Summary {
        n_trials: trials.len(),
        final_entropy: last(|m| m.entropy),
        final_mse: last(|m| m.mse),
        final_mean_detections: last(|m| m.mean_detections),
        mission_mse: MeanStd::of(&mission),
        curves,
    })
}
