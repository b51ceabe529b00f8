//! The `chex` command-line interface.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use super::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use super::config::{load_config, ExperimentConfig, LoadedConfig};
use super::dataset::build_dataset;
use super::metrics::{metrics_to_csv, read_metrics_csv, write_json, write_metrics_csv};
use super::suite::run_oracle_suite;
use super::write_atomic;
use crate::error::{Error, Result};
use crate::explore::{DecayKind, InitScheme, SamplingMode};
use crate::simnet::{count_flops, Dataset, MetricsRow, RunMode, Trainer};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_ORACLE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "chex", version, about = "Channel exploration: prune-and-regrow training on desk-scale networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one configuration and write metrics, a summary and a checkpoint.
    Run(RunArgs),
    /// Sweep one exploration axis over several seeds.
    Ablate(AblateArgs),
    /// Compare every closed-form component against its reference oracle.
    OracleCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the FLOPs of the network stored in a checkpoint.
    Flops {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Convert metrics (a metrics CSV or a checkpoint) to CSV or JSON.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Default, Args)]
struct Overrides {
    /// TOML file with experiment settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides CHEX_SEED and the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// chex, one_shot_early, gradual or plain.
    #[arg(long)]
    mode: Option<RunMode>,
    /// Target global channel sparsity in [0, 1).
    #[arg(long)]
    sparsity: Option<f64>,
    /// Initial regrowing factor.
    #[arg(long)]
    delta0: Option<f64>,
    /// Iterations between exploration steps.
    #[arg(long)]
    dt: Option<u64>,
    /// constant, linear or cosine.
    #[arg(long)]
    scheduler: Option<DecayKind>,
    /// zero, random, ema or mru.
    #[arg(long)]
    init: Option<InitScheme>,
    /// importance, uniform or deterministic.
    #[arg(long)]
    sampling: Option<SamplingMode>,
    /// Output directory (default chex-out).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Continue from a checkpoint instead of starting fresh.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Stop (and checkpoint) after this iteration.
    #[arg(long)]
    stop_at: Option<u64>,
    /// Also checkpoint every this many iterations.
    #[arg(long)]
    checkpoint_every: Option<u64>,
    /// Verify mask, cache and restoration invariants at every iteration.
    #[arg(long)]
    audit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Axis {
    Scheduler,
    Init,
    Sampling,
    Delta0,
    Dt,
    Mode,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, value_enum)]
    axis: Axis,
    /// Seeds per value, counted up from the base seed.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExportFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    format: ExportFormat,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Runs the CLI on `argv` (including the program name) and returns the
/// process exit code.
pub fn cli_run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Ablate(args) => cmd_ablate(&args),
        Command::OracleCheck { seed } => cmd_oracle_check(seed),
        Command::Flops { checkpoint } => cmd_flops(&checkpoint),
        Command::Export(args) => cmd_export(&args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

/// Applies defaults, the config file, `CHEX_SEED` and CLI flags, in that
/// order of increasing precedence.
fn experiment_config(o: &Overrides) -> Result<LoadedConfig> {
    let mut loaded = match &o.config {
        Some(path) => load_config(path)?,
        None => LoadedConfig {
            config: ExperimentConfig::default(),
            warnings: Vec::new(),
        },
    };
    let c = &mut loaded.config;
    if let Ok(raw) = std::env::var("CHEX_SEED") {
        c.seed = raw
            .trim()
            .parse()
            .map_err(|_| Error::config("CHEX_SEED", format!("expected an unsigned integer, got `{raw}`")))?;
    }
    if let Some(v) = o.seed {
        c.seed = v;
    }
    if let Some(v) = o.mode {
        c.mode = v;
    }
    if let Some(v) = o.sparsity {
        c.sparsity = v;
    }
    if let Some(v) = o.delta0 {
        c.delta0 = v;
    }
    if let Some(v) = o.dt {
        c.dt_iters = Some(v);
    }
    if let Some(v) = o.scheduler {
        c.scheduler = v;
    }
    if let Some(v) = o.init {
        c.init_scheme = v;
    }
    if let Some(v) = o.sampling {
        c.sampling = v;
    }
    if let Some(v) = &o.out {
        c.out = v.clone();
    }
    // CLI spellings differ from file keys; report the file key on failure
    c.validate()?;
    Ok(loaded)
}

#[derive(Debug, Serialize)]
struct RunSummary {
    mode: RunMode,
    seed: u64,
    iterations: u64,
    final_accuracy: f64,
    final_loss: f64,
    flops: u64,
    dense_flops: u64,
    flops_reduction: f64,
    retained_per_layer: Vec<usize>,
    exploration_steps: usize,
}

fn summarize(exp: &ExperimentConfig, trainer: &Trainer) -> RunSummary {
    let f = count_flops(trainer.network());
    let last = trainer.state().metrics.last();
    RunSummary {
        mode: trainer.config().mode,
        seed: exp.seed,
        iterations: trainer.iteration(),
        final_accuracy: last.map_or(f64::NAN, |m| m.acc),
        final_loss: last.map_or(f64::NAN, |m| m.loss),
        flops: f.total,
        dense_flops: f.dense_total,
        flops_reduction: f.reduction_vs_dense,
        retained_per_layer: trainer.network().retained_counts(),
        exploration_steps: trainer.state().steps.len(),
    }
}

fn print_row(m: &MetricsRow) {
    println!(
        "iter {:>6}  loss {:.4}  acc {:.4}  flops {:>8}  delta {:.4}  retained {:?}  {:.0} ms",
        m.iteration, m.loss, m.acc, m.flops, m.delta, m.retained_per_layer, m.wall_time_ms
    );
}

fn write_outputs(dir: &Path, exp: &ExperimentConfig, trainer: &Trainer) -> Result<()> {
    write_metrics_csv(&dir.join("metrics.csv"), &trainer.state().metrics)?;
    write_json(&dir.join("summary.json"), &summarize(exp, trainer))?;
    let ck = Checkpoint::new(exp.clone(), trainer.config().clone(), trainer.state().clone());
    save_checkpoint(&dir.join("checkpoint.json"), &ck)
}

fn cmd_run(args: &RunArgs) -> Result<i32> {
    let (exp, data, mut trainer_state) = match &args.resume {
        Some(path) => {
            let ck = load_checkpoint(path)?;
            let mut exp = ck.experiment;
            exp.out = args.overrides.out.clone().unwrap_or_else(|| ExperimentConfig::default().out);
            let data = build_dataset(&exp.dataset)?;
            (exp, data, Some((ck.run, ck.state)))
        }
        None => {
            let loaded = experiment_config(&args.overrides)?;
            for w in &loaded.warnings {
                eprintln!("warning: {w}");
            }
            let data = build_dataset(&loaded.config.dataset)?;
            (loaded.config, data, None)
        }
    };
    let mut trainer = match trainer_state.take() {
        Some((run, state)) => Trainer::from_state(&data, run, state)?,
        None => Trainer::new(&data, exp.resolve(data.train_len())?)?,
    };
    trainer.set_audit(args.audit);
    let total = trainer.config().train.iterations;
    let stop = args.stop_at.unwrap_or(total).min(total);
    let mut printed = trainer.state().metrics.len();
    while trainer.iteration() < stop {
        let next = match args.checkpoint_every {
            Some(k) if k > 0 => ((trainer.iteration() / k + 1) * k).min(stop),
            _ => stop,
        };
        trainer.run_until(next)?;
        for m in &trainer.state().metrics[printed..] {
            print_row(m);
        }
        printed = trainer.state().metrics.len();
        if args.checkpoint_every.is_some() {
            let ck = Checkpoint::new(exp.clone(), trainer.config().clone(), trainer.state().clone());
            save_checkpoint(&exp.out.join("checkpoint.json"), &ck)?;
        }
    }
    write_outputs(&exp.out, &exp, &trainer)?;
    if args.audit {
        let a = &trainer.state().audit;
        println!(
            "audit: {} iterations checked, {} restorations verified",
            a.iterations_checked, a.regrows_verified
        );
    }
    println!("wrote {}", exp.out.display());
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Serialize)]
struct CellSummary {
    axis: String,
    value: String,
    seed: u64,
    final_accuracy: f64,
    flops: u64,
    flops_reduction: f64,
}

#[derive(Debug, Clone, Serialize)]
struct AxisRow {
    value: String,
    runs: usize,
    mean_accuracy: f64,
    sd_accuracy: f64,
    mean_flops: f64,
}

fn axis_values(axis: Axis) -> Vec<String> {
    let names = |all: Vec<&str>| all.into_iter().map(String::from).collect();
    match axis {
        Axis::Scheduler => names(DecayKind::ALL.iter().map(|k| k.as_str()).collect()),
        Axis::Init => names(InitScheme::ALL.iter().map(|k| k.as_str()).collect()),
        Axis::Sampling => names(SamplingMode::ALL.iter().map(|k| k.as_str()).collect()),
        Axis::Delta0 => names(vec!["0.1", "0.2", "0.3", "0.4", "0.5"]),
        Axis::Dt => names(vec!["1", "2", "4"]),
        Axis::Mode => names(RunMode::ALL.iter().map(|k| k.as_str()).collect()),
    }
}

fn apply_axis(cfg: &mut ExperimentConfig, axis: Axis, value: &str) -> Result<()> {
    match axis {
        Axis::Scheduler => cfg.scheduler = value.parse()?,
        Axis::Init => cfg.init_scheme = value.parse()?,
        Axis::Sampling => cfg.sampling = value.parse()?,
        Axis::Delta0 => cfg.delta0 = value.parse().map_err(|_| Error::config("delta0", value))?,
        Axis::Dt => {
            cfg.dt_iters = None;
            cfg.dt_epochs = value.parse().map_err(|_| Error::config("dt_epochs", value))?;
        }
        Axis::Mode => cfg.mode = value.parse()?,
    }
    Ok(())
}

fn run_cell(base: &ExperimentConfig, data: &Dataset, axis: Axis, value: &str, seed: u64) -> Result<CellSummary> {
    let mut cfg = base.clone();
    apply_axis(&mut cfg, axis, value)?;
    cfg.seed = seed;
    let out = Trainer::new(data, cfg.resolve(data.train_len())?)?.run()?;
    let f = count_flops(&out.network);
    Ok(CellSummary {
        axis: format!("{axis:?}").to_lowercase(),
        value: value.to_string(),
        seed,
        final_accuracy: out.final_accuracy(),
        flops: f.total,
        flops_reduction: f.reduction_vs_dense,
    })
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

fn cmd_ablate(args: &AblateArgs) -> Result<i32> {
    if args.seeds == 0 {
        return Err(Error::config("seeds", "need at least one seed"));
    }
    let loaded = experiment_config(&args.overrides)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let base = loaded.config;
    let data = build_dataset(&base.dataset)?;
    let values = axis_values(args.axis);
    let cells: Vec<(String, u64)> = values
        .iter()
        .flat_map(|v| (0..args.seeds).map(move |s| (v.clone(), base.seed + s)))
        .collect();
    let started = Instant::now();
    let work = || -> Result<Vec<CellSummary>> {
        cells
            .par_iter()
            .map(|(v, s)| run_cell(&base, &data, args.axis, v, *s))
            .collect()
    };
    let results = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let dir = base.out.join(format!("ablate-{}", format!("{:?}", args.axis).to_lowercase()));
    for cell in &results {
        write_json(&dir.join(format!("{}-seed{}.json", cell.value, cell.seed)), cell)?;
    }
    let rows: Vec<AxisRow> = values
        .iter()
        .map(|v| {
            let mine: Vec<&CellSummary> = results.iter().filter(|c| &c.value == v).collect();
            let accs: Vec<f64> = mine.iter().map(|c| c.final_accuracy).collect();
            let (mean, sd) = mean_sd(&accs);
            AxisRow {
                value: v.clone(),
                runs: accs.len(),
                mean_accuracy: mean,
                sd_accuracy: sd,
                mean_flops: mine.iter().map(|c| c.flops as f64).sum::<f64>() / accs.len() as f64,
            }
        })
        .collect();
    write_json(&dir.join("summary.json"), &rows)?;
    let mut table = csv::Writer::from_writer(Vec::new());
    table
        .write_record(["value", "runs", "mean_accuracy", "sd_accuracy", "mean_flops"])
        .and_then(|_| {
            rows.iter().try_for_each(|r| {
                table.write_record([
                    r.value.clone(),
                    r.runs.to_string(),
                    r.mean_accuracy.to_string(),
                    r.sd_accuracy.to_string(),
                    r.mean_flops.to_string(),
                ])
            })
        })
        .map_err(|e| Error::Parse(e.to_string()))?;
    let bytes = table.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    write_atomic(&dir.join("summary.csv"), &bytes)?;
    println!("{:<16} {:>5} {:>18} {:>12}", "value", "runs", "accuracy", "mean flops");
    for r in &rows {
        println!(
            "{:<16} {:>5} {:>8.4} ± {:<7.4} {:>12.1}",
            r.value, r.runs, r.mean_accuracy, r.sd_accuracy, r.mean_flops
        );
    }
    println!("{} cells in {:.1} s, wrote {}", results.len(), started.elapsed().as_secs_f64(), dir.display());
    Ok(EXIT_OK)
}

fn cmd_oracle_check(seed: u64) -> Result<i32> {
    let outcomes = run_oracle_suite(seed)?;
    let mut failed = 0;
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
        failed += usize::from(!o.passed);
    }
    println!("{} of {} checks passed", outcomes.len() - failed, outcomes.len());
    Ok(if failed == 0 { EXIT_OK } else { EXIT_ORACLE })
}

fn cmd_flops(path: &Path) -> Result<i32> {
    let ck = load_checkpoint(path)?;
    let f = count_flops(&ck.state.net);
    let retained = ck.state.net.retained_counts();
    println!("checkpoint at iteration {}", ck.iteration);
    for (l, (cost, kept)) in f.per_layer.iter().zip(&retained).enumerate() {
        println!("layer {l}: {cost} multiply-adds, {kept}/{} channels", ck.state.net.layers[l].width());
    }
    println!("head: {}", f.head);
    println!("total: {} of {} dense ({:.2}% reduction)", f.total, f.dense_total, 100.0 * f.reduction_vs_dense);
    Ok(EXIT_OK)
}

fn cmd_export(args: &ExportArgs) -> Result<i32> {
    let is_csv = args.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let rows = if is_csv {
        read_metrics_csv(&args.input)?
    } else {
        load_checkpoint(&args.input)?.state.metrics
    };
    let bytes = match args.format {
        ExportFormat::Csv => metrics_to_csv(&rows)?,
        ExportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&rows).map_err(|e| Error::Parse(e.to_string()))?;
            s.push('\n');
            s.into_bytes()
        }
    };
    match &args.out {
        Some(path) => write_atomic(path, &bytes)?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(EXIT_OK)
}
