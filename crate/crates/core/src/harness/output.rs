//! CSV tables and on-disk run bundles.
//!
//! A bundle directory holds `config.toml`, `summary.csv`, `curves.csv` and a
//! `trials/` directory with per-seed metrics, planner logs, traces and
//! optional map snapshots (`.pgm` + `.meta` + `.csv`).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::mapping::{
    snapshot_meta_line, to_pgm, write_probability_csv, GridGeometry, OccupancyGrid,
};
use crate::metrics::Summary;
use crate::scenario::ScenarioConfig;

use super::episode::EpisodeTrace;
use super::trace;

pub const METRICS_HEADER: &str = "seed,t,H,mse,n_step,mean_detections";
pub const SUMMARY_HEADER: &str = "label,n_trials,H_mean,H_std,mse_mean,mse_std,mean_detections_mean,mean_detections_std,mission_mse_mean,mission_mse_std";
pub const PLANNER_HEADER: &str =
    "seed,replan,t,candidate,heading_change_deg,entropy_term,tracking_term,w,total,chosen,eval_ms";

pub fn metrics_csv<'a>(traces: impl IntoIterator<Item = &'a EpisodeTrace>) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for tr in traces {
        for s in &tr.steps {
            let m = &s.metrics;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                tr.seed, m.t, m.entropy, m.mse, m.n_detections_step, m.mean_detections
            );
        }
    }
    out
}

pub fn summary_row(label: &str, s: &Summary) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        label,
        s.n_trials,
        s.final_entropy.mean,
        s.final_entropy.std,
        s.final_mse.mean,
        s.final_mse.std,
        s.final_mean_detections.mean,
        s.final_mean_detections.std,
        s.mission_mse.mean,
        s.mission_mse.std
    )
}

pub fn summary_csv<'a>(rows: impl IntoIterator<Item = (&'a str, &'a Summary)>) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for (label, s) in rows {
        out.push_str(&summary_row(label, s));
        out.push('\n');
    }
    out
}

pub fn curves_csv(s: &Summary) -> String {
    let mut out =
        String::from("t,H_mean,H_std,mse_mean,mse_std,mean_detections_mean,mean_detections_std\n");
    for c in &s.curves {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.t,
            c.entropy.mean,
            c.entropy.std,
            c.mse.mean,
            c.mse.std,
            c.mean_detections.mean,
            c.mean_detections.std
        );
    }
    out
}

/// One row per scored candidate. `eval_ms` is blank for replayed traces.
pub fn planner_log_csv(tr: &EpisodeTrace) -> String {
    let mut out = format!("{PLANNER_HEADER}\n");
    for r in &tr.planner_log {
        let ms = tr
            .eval_ms
            .get(r.replan)
            .map(|v| format!("{v:.3}"))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            tr.seed,
            r.replan,
            r.t,
            r.candidate,
            r.heading_change_deg,
            r.entropy_term,
            r.tracking_term,
            r.w,
            r.total,
            u8::from(r.chosen),
            ms
        );
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes the per-seed artifacts of one trace into `dir`.
pub fn write_trial(dir: &Path, cfg: &ScenarioConfig, tr: &EpisodeTrace) -> Result<()> {
    create_dir(dir)?;
    let stem = format!("seed_{}", tr.seed);
    write_file(&dir.join(format!("{stem}_metrics.csv")), &metrics_csv([tr]))?;
    write_file(
        &dir.join(format!("{stem}_planner.csv")),
        &planner_log_csv(tr),
    )?;
    trace::write(&dir.join(format!("{stem}.trace")), tr)?;
    let geo = GridGeometry::from_map(&cfg.map);
    for snap in &tr.snapshots {
        let grid = OccupancyGrid::from_probabilities(
            geo,
            &snap.probabilities,
            cfg.mapping.p_low,
            cfg.mapping.p_high,
        )?;
        let name = format!("{stem}_t{:06.1}", snap.t);
        write_file(&dir.join(format!("{name}.pgm")), &to_pgm(&grid))?;
        write_file(
            &dir.join(format!("{name}.meta")),
            &snapshot_meta_line(&grid, snap.t),
        )?;
        write_file(
            &dir.join(format!("{name}.csv")),
            &write_probability_csv(&geo, &snap.probabilities),
        )?;
    }
    Ok(())
}

/// Writes a complete bundle for one configuration. Returns the directory.
pub fn write_bundle(
    out: &Path,
    cfg: &ScenarioConfig,
    label: &str,
    summary: &Summary,
    traces: &[EpisodeTrace],
) -> Result<PathBuf> {
    create_dir(out)?;
    write_file(&out.join("config.toml"), &cfg.to_toml_string())?;
    write_file(&out.join("summary.csv"), &summary_csv([(label, summary)]))?;
    write_file(&out.join("curves.csv"), &curves_csv(summary))?;
    let trials = out.join("trials");
    for tr in traces {
        write_trial(&trials, cfg, tr)?;
    }
    Ok(out.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::episode::run_episode;

    #[test]
    fn metrics_csv_shape() {
        let mut cfg = ScenarioConfig::default();
        cfg.mission.budget_s = 5.0;
        cfg.mission.planning_horizon_s = 5.0;
        let tr = run_episode(&cfg, 0).unwrap();
        let csv = metrics_csv([&tr]);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], METRICS_HEADER);
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[1].split(',').count(), 6);
    }
}
