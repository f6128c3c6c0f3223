use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dyntrack::harness::{self, output, run_episode_with, run_monte_carlo, EpisodeOptions};
use dyntrack::mapping::GridGeometry;
use dyntrack::metrics::aggregate;
use dyntrack::planner::{PlannerKind, WeightSchedule};
use dyntrack::predictor::write_dataset;
use dyntrack::ScenarioConfig;

const SECTIONS: &[&str] = &[
    "map",
    "targets",
    "wind",
    "asv",
    "mission",
    "sensor",
    "mapping",
    "predictor",
    "planner",
    "metrics",
    "sweep",
];

/// Informative path planning over wind-drifting targets.
///
/// Any configuration key can be overridden with `--section.key=value`,
/// e.g. `--wind.mean_speed=9 --planner.tree_depth=2`.
#[derive(Parser, Debug)]
#[command(name = "dyntrack", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a single episode.
    Run(RunArgs),
    /// Monte-Carlo sweep, optionally over a grid of planners, weights and
    /// prediction on/off.
    Sweep(SweepArgs),
    /// Export a synthetic predictor training set.
    Dataset(DatasetArgs),
    /// Validate a stored trace and print its summary.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML scenario file; defaults apply to anything missing.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Episode seed (first seed for sweeps).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    planner: Option<PlannerKind>,
    /// Tracking weight: a constant, `decay(W0)` or `W0(1-t/B)`.
    #[arg(long)]
    w: Option<WeightSchedule>,
    /// Skip the map's drift-prediction step.
    #[arg(long)]
    no_prediction_step: bool,
    /// Store a map snapshot every this many seconds.
    #[arg(long)]
    snapshot_every: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// Planner(s) to sweep; repeat or comma-separate.
    #[arg(long, value_delimiter = ',')]
    planner: Vec<PlannerKind>,
    /// Weight schedule(s) to sweep; repeat the flag for several.
    #[arg(long)]
    w: Vec<WeightSchedule>,
    #[arg(long)]
    no_prediction_step: bool,
    /// Run every setting both with and without the prediction step.
    #[arg(long, conflicts_with = "no_prediction_step")]
    ablate_prediction: bool,
    #[arg(long)]
    snapshot_every: Option<f64>,
}

#[derive(Args, Debug)]
struct DatasetArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    /// Trace file written by `run` or `sweep`.
    trace: PathBuf,
    /// Re-export metrics and planner CSVs into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Pulls `--section.key=value` / `--section.key value` out of argv.
type Overrides = Vec<(String, String)>;

fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Overrides)> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(body) = a.strip_prefix("--") else {
            rest.push(a);
            continue;
        };
        let (key, inline) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (body.to_string(), None),
        };
        let is_override = key
            .split_once('.')
            .is_some_and(|(section, field)| SECTIONS.contains(&section) && !field.is_empty());
        if !is_override {
            rest.push(a);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => match it.next() {
                Some(v) => v,
                None => bail!("override --{key} needs a value"),
            },
        };
        overrides.push((key, value));
    }
    Ok((rest, overrides))
}

fn load_config(common: &Common, overrides: &[(String, String)]) -> Result<ScenarioConfig> {
    let text = match &common.config {
        Some(p) => {
            std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?
        }
        None => String::new(),
    };
    let cfg = ScenarioConfig::from_toml_with_overrides(&text, overrides)?;
    Ok(cfg)
}

fn setting_label(cfg: &ScenarioConfig) -> String {
    format!(
        "{}_w={}_pred={}",
        cfg.planner.kind,
        cfg.planner.weight,
        if cfg.mapping.prediction_step {
            "on"
        } else {
            "off"
        }
    )
}

fn run(args: RunArgs, overrides: &[(String, String)]) -> Result<()> {
    let mut cfg = load_config(&args.common, overrides)?;
    if let Some(p) = args.planner {
        cfg.planner.kind = p;
    }
    if let Some(w) = args.w {
        cfg.planner.weight = w;
    }
    if args.no_prediction_step {
        cfg.mapping.prediction_step = false;
    }
    let cfg = cfg.validated()?;
    let seed = args.common.seed.unwrap_or(cfg.rng_seed);
    let opts = EpisodeOptions {
        snapshot_every_s: args.snapshot_every,
    };
    let trace = run_episode_with(&cfg, seed, &opts)?;
    let summary = aggregate(&[trace.metrics()])?;
    let label = setting_label(&cfg);
    output::write_bundle(
        &args.common.out,
        &cfg,
        &label,
        &summary,
        std::slice::from_ref(&trace),
    )?;
    let m = trace.final_metrics().context("episode produced no steps")?;
    println!(
        "{label} seed={seed} steps={} replans={} H={:.4} mse={:.4} mean_detections={:.4} checksum={}",
        trace.steps.len(),
        trace.replans,
        m.entropy,
        m.mse,
        m.mean_detections,
        trace.checksum()
    );
    println!("wrote {}", args.common.out.display());
    Ok(())
}

fn sweep(args: SweepArgs, overrides: &[(String, String)]) -> Result<()> {
    let base = load_config(&args.common, overrides)?;
    let planners = if args.planner.is_empty() {
        vec![base.planner.kind]
    } else {
        args.planner.clone()
    };
    let weights = if args.w.is_empty() {
        vec![base.planner.weight]
    } else {
        args.w.clone()
    };
    let prediction: Vec<bool> = if args.ablate_prediction {
        vec![true, false]
    } else if args.no_prediction_step {
        vec![false]
    } else {
        vec![base.mapping.prediction_step]
    };
    let seed0 = args.common.seed.unwrap_or(base.rng_seed);
    let workers = args.workers.unwrap_or(base.sweep.workers);
    let opts = EpisodeOptions {
        snapshot_every_s: args.snapshot_every,
    };

    let mut rows = Vec::new();
    for &kind in &planners {
        for &w in &weights {
            for &pred in &prediction {
                let mut cfg = base.clone();
                cfg.planner.kind = kind;
                cfg.planner.weight = w;
                cfg.mapping.prediction_step = pred;
                let cfg = cfg.validated()?;
                let label = setting_label(&cfg);
                let r = run_monte_carlo(&cfg, args.trials, seed0, workers, &opts)?;
                output::write_bundle(
                    &args.common.out.join(&label),
                    &cfg,
                    &label,
                    &r.summary,
                    &r.traces,
                )?;
                println!("{}", output::summary_row(&label, &r.summary));
                rows.push((label, r.summary));
            }
        }
    }
    std::fs::create_dir_all(&args.common.out)?;
    let combined = output::summary_csv(rows.iter().map(|(l, s)| (l.as_str(), s)));
    let path = args.common.out.join("summary.csv");
    std::fs::write(&path, combined).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn dataset(args: DatasetArgs, overrides: &[(String, String)]) -> Result<()> {
    if args.samples == 0 {
        bail!("--samples must be positive");
    }
    let cfg = load_config(&args.common, overrides)?.validated()?;
    let seed = args.common.seed.unwrap_or(cfg.rng_seed);
    let dir = write_dataset(
        &args.common.out,
        GridGeometry::from_map(&cfg.map),
        cfg.wind.gamma,
        &cfg.predictor,
        args.samples,
        seed,
    )?;
    println!("wrote {} samples to {}", args.samples, dir.display());
    Ok(())
}

fn replay(args: ReplayArgs) -> Result<()> {
    let trace = harness::replay(&args.trace)?;
    let m = trace.final_metrics();
    println!(
        "seed={} planner={} steps={} replans={} checksum={}",
        trace.seed,
        trace.planner,
        trace.steps.len(),
        trace.replans,
        trace.checksum()
    );
    if let Some(m) = m {
        println!(
            "final t={} H={:.4} mse={:.4} mean_detections={:.4}",
            m.t, m.entropy, m.mse, m.mean_detections
        );
    }
    if let Some(out) = args.out {
        export(&out, &trace)?;
    }
    Ok(())
}

fn export(out: &Path, trace: &harness::EpisodeTrace) -> Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("metrics.csv"), output::metrics_csv([trace]))?;
    std::fs::write(out.join("planner.csv"), output::planner_log_csv(trace))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> Result<()> {
    let (argv, overrides) = split_overrides(std::env::args().collect())?;
    let cli = Cli::parse_from(argv);
    match cli.command {
        Command::Run(a) => run(a, &overrides),
        Command::Sweep(a) => sweep(a, &overrides),
        Command::Dataset(a) => dataset(a, &overrides),
        Command::Replay(a) => {
            if !overrides.is_empty() {
                bail!("configuration overrides do not apply to replay");
            }
            replay(a)
        }
    }
}
