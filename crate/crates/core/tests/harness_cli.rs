//! Episodes, trace files and the command-line front end.

use std::path::Path;
use std::process::Command;

use dyntrack::harness::{self, run_episode, run_episode_with, trace, EpisodeOptions, TraceError};
use dyntrack::ScenarioConfig;

fn short_config() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.mission.budget_s = 30.0;
    cfg.mission.planning_horizon_s = 25.0;
    cfg
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dyntrack"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawn dyntrack");
    assert!(
        out.status.success(),
        "dyntrack failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn trace_round_trips_through_text() {
    let tr = run_episode_with(
        &short_config(),
        4,
        &EpisodeOptions {
            snapshot_every_s: Some(10.0),
        },
    )
    .unwrap();
    assert_eq!(tr.steps.len(), 30);
    assert_eq!(tr.snapshots.len(), 3);
    let text = trace::to_string(&tr);
    let back = trace::from_str(&text).unwrap();
    assert_eq!(back, tr);
    assert_eq!(back.checksum(), tr.checksum());
}

#[test]
fn truncated_or_foreign_traces_are_rejected() {
    let tr = run_episode(&short_config(), 5).unwrap();
    let text = trace::to_string(&tr);
    let cut: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
    assert!(matches!(
        trace::from_str(&cut),
        Err(TraceError::Truncated { .. })
    ));
    let foreign = text.replacen("dyntrack-trace 1", "dyntrack-trace 99", 1);
    assert!(matches!(
        trace::from_str(&foreign),
        Err(TraceError::Version { .. })
    ));
}

#[test]
fn episode_metrics_are_well_formed() {
    let tr = run_episode(&short_config(), 6).unwrap();
    for (k, s) in tr.steps.iter().enumerate() {
        assert_eq!(s.step, k);
        assert_eq!(s.t, (k + 1) as f64);
        assert!((0.0..=1.0).contains(&s.metrics.entropy));
        assert!(s.metrics.mse >= 0.0);
    }
    let first = tr.steps.first().unwrap().metrics.entropy;
    let last = tr.final_metrics().unwrap().entropy;
    assert!(last < first);
    assert!(tr.replans >= 1);
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn cli_run_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let stdout = run_ok(
        bin()
            .args([
                "run",
                "--seed",
                "3",
                "--mission.budget_s=30",
                "--snapshot-every",
                "15",
                "--planner",
                "greedy",
                "--out",
            ])
            .arg(&out),
    );
    assert!(stdout.contains("greedy_w=decay(5)_pred=on"), "{stdout}");

    let cfg = read(&out.join("config.toml"));
    assert!(cfg.contains("budget_s = 30"));
    assert!(read(&out.join("summary.csv")).starts_with("label,n_trials"));
    let trials = out.join("trials");
    let metrics = read(&trials.join("seed_3_metrics.csv"));
    assert_eq!(metrics.lines().count(), 31);
    assert!(read(&trials.join("seed_3_t0015.0.pgm")).starts_with("P2\n100 100\n255\n"));

    let checksum = stdout
        .split_whitespace()
        .find_map(|w| w.strip_prefix("checksum="))
        .unwrap()
        .to_string();
    let replayed = run_ok(bin().arg("replay").arg(trials.join("seed_3.trace")));
    assert!(
        replayed.contains(&format!("checksum={checksum}")),
        "{replayed}"
    );

    // the library agrees with the CLI
    let tr = harness::replay(&trials.join("seed_3.trace")).unwrap();
    assert_eq!(tr.checksum(), checksum);
}

#[test]
fn cli_sweep_writes_one_bundle_per_setting() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    run_ok(
        bin()
            .args([
                "sweep",
                "--trials",
                "2",
                "--planner",
                "lawnmower,random",
                "--ablate-prediction",
                "--mission.budget_s=20",
                "--mission.planning_horizon_s=20",
                "--out",
            ])
            .arg(&out),
    );
    let summary = read(&out.join("summary.csv"));
    assert_eq!(summary.lines().count(), 5);
    for label in [
        "lawnmower_w=decay(5)_pred=on",
        "lawnmower_w=decay(5)_pred=off",
        "random_w=decay(5)_pred=on",
        "random_w=decay(5)_pred=off",
    ] {
        assert!(summary.contains(label));
        assert!(out.join(label).join("trials").join("seed_0.trace").exists());
    }
}

#[test]
fn cli_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["run", "--mapping.p_low=0.6", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!status.status.success());
    assert!(String::from_utf8_lossy(&status.stderr).contains("p_low"));

    let status = bin().args(["run", "--wind.bogus=1"]).output().unwrap();
    assert!(!status.status.success());

    let missing = bin()
        .args(["replay", "/nonexistent.trace"])
        .output()
        .unwrap();
    assert!(!missing.status.success());
}

#[test]
fn cli_dataset_export() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = run_ok(
        bin()
            .args(["dataset", "--samples", "3", "--seed", "1", "--out"])
            .arg(dir.path()),
    );
    assert!(stdout.contains("wrote 3 samples"));
}
