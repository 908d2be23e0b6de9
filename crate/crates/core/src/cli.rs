//! The `prox-evi` command line.
//!
//! Subcommands: `run` trains one benchmark, `sweep-eta` repeats a run over
//! several step sizes, `eval` evaluates a saved checkpoint on a uniform grid.
//! Exit codes: 0 success, 1 I/O or internal failure, 2 usage or argument
//! error, 3 training diverged.
//!
//! Every run directory holds:
//!
//! * `run_log.csv`: `epoch,loss,l2_rel,linf_rel`, one row per logged epoch;
//! * `solution.csv`: `x1[,x2],u_exact,u_pred,abs_err` on the test points;
//! * `config.json`: the resolved [`RunConfig`] plus a `version` string;
//! * `checkpoint.bin`: final parameters (see [`crate::network::checkpoint`]).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::benchmarks::{BenchmarkCase, LossVariant, PointSet};
use crate::error::{EviError, Result};
use crate::network::checkpoint::{read_checkpoint, write_checkpoint};
use crate::trainer::{evaluate, run, ErrorMetrics, RunConfig, RunOutcome};

/// Environment variable overriding the default output root (`runs`).
pub const OUT_ENV: &str = "PROX_EVI_OUT";

pub const VERSION: &str = env!("PROX_EVI_GIT_VERSION");

pub const RUN_LOG_FILE: &str = "run_log.csv";
pub const SOLUTION_FILE: &str = "solution.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

#[derive(Parser, Debug)]
#[command(name = "prox-evi", version, about = "Train and evaluate proximal residual networks for variational inequalities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one benchmark and write its run directory.
    Run(RunArgs),
    /// Train one benchmark for each step size in a list.
    SweepEta(SweepArgs),
    /// Evaluate a checkpoint on a uniform grid without training.
    Eval(EvalArgs),
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Benchmark name, e.g. obstacle1d_sym or torsion2d(c=1).
    #[arg(long)]
    benchmark: Option<String>,
    /// Start from a saved config.json; other flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Torsion constant c.
    #[arg(long)]
    c: Option<f64>,
    /// Yield stress τ of the Bingham problem.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, value_enum)]
    loss_variant: Option<LossVariant>,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    #[arg(long)]
    hidden_layers: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    /// Log every N epochs (the final epoch is always logged).
    #[arg(long)]
    log_every: Option<usize>,
    /// Interior points per step; full batch when omitted.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Output directory; defaults to $PROX_EVI_OUT/<benchmark> or runs/<benchmark>.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated step sizes.
    #[arg(long, default_value = "1e-2,1e-3,1e-4,1e-5", value_delimiter = ',')]
    etas: Vec<f64>,
    /// Runs executed concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Run configuration; defaults to config.json next to the checkpoint.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Nodes per side of the evaluation grid.
    #[arg(long)]
    grid: usize,
    /// Output directory; defaults to eval_<grid> next to the checkpoint.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// `config.json` contents.
#[derive(Serialize, Deserialize)]
struct ConfigFile {
    #[serde(flatten)]
    config: RunConfig,
    version: String,
}

pub fn write_config(config: &RunConfig, path: &Path) -> Result<()> {
    let file = ConfigFile {
        config: config.clone(),
        version: VERSION.to_string(),
    };
    fs::write(path, serde_json::to_string_pretty(&file)? + "\n")?;
    Ok(())
}

/// Reads a `config.json`; the `version` entry is ignored.
pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn default_out_root() -> PathBuf {
    std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match (&self.config, &self.benchmark) {
            (Some(path), _) => read_config(path)?,
            (None, Some(name)) => RunConfig::for_benchmark(name)?,
            (None, None) => return Err(EviError::Argument("--benchmark or --config is required".into())),
        };
        if self.config.is_some() {
            if let Some(name) = &self.benchmark {
                let fresh = RunConfig::for_benchmark(name)?;
                cfg.benchmark = fresh.benchmark;
            }
        }
        let case = cfg.case()?.with_constant(self.c, self.tau)?;
        let relabeled = case.label() != cfg.benchmark;
        cfg.benchmark = case.label();
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.eta {
            cfg.eta = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.loss_variant {
            cfg.loss_variant = v;
        }
        if let Some(v) = self.train_size {
            cfg.train_size = v;
        }
        if let Some(v) = self.test_size {
            cfg.test_size = v;
        }
        if let Some(v) = self.hidden_layers {
            cfg.hidden_layers = v;
        }
        if let Some(v) = self.width {
            cfg.width = v;
        }
        if let Some(v) = self.log_every {
            cfg.log_every = v;
        }
        if self.batch_size.is_some() {
            cfg.batch_size = self.batch_size;
        }
        cfg.out_dir = match &self.out {
            Some(dir) => dir.clone(),
            None if self.config.is_some() && !relabeled => cfg.out_dir,
            None => default_out_root().join(&cfg.benchmark),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:e}")
}

/// `solution.csv` contents.
pub fn solution_csv(points: &PointSet, exact: &[f64], pred: &[f64]) -> String {
    let mut s = String::new();
    let coords: Vec<String> = (1..=points.dim).map(|i| format!("x{i}")).collect();
    let _ = writeln!(s, "{},u_exact,u_pred,abs_err", coords.join(","));
    for (i, x) in points.iter().enumerate() {
        for v in x {
            s.push_str(&fmt_num(*v));
            s.push(',');
        }
        let _ = writeln!(
            s,
            "{},{},{}",
            fmt_num(exact[i]),
            fmt_num(pred[i]),
            fmt_num((exact[i] - pred[i]).abs())
        );
    }
    s
}

/// Writes the run directory of a finished (or aborted) run.
pub fn write_bundle(outcome: &RunOutcome) -> Result<PathBuf> {
    let dir = outcome.config.out_dir.clone();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(RUN_LOG_FILE), outcome.log.to_csv())?;
    fs::write(
        dir.join(SOLUTION_FILE),
        solution_csv(&outcome.test_points, &outcome.exact, &outcome.predicted),
    )?;
    write_config(&outcome.config, &dir.join(CONFIG_FILE))?;
    write_checkpoint(&outcome.net, dir.join(CHECKPOINT_FILE))?;
    Ok(dir)
}

fn describe(e: &ErrorMetrics) -> String {
    let kind = if e.absolute { "abs" } else { "rel" };
    format!(
        "l2_{kind}={:.6e} linf_{kind}={:.6e} max_abs={:.6e}",
        e.l2_rel, e.linf_rel, e.max_abs
    )
}

fn exit_code(err: &EviError) -> i32 {
    match err {
        EviError::Argument(_) | EviError::Checkpoint(_) | EviError::Json(_) => 2,
        EviError::Diverged { .. } => 3,
        _ => 1,
    }
}

fn cmd_run(args: &RunArgs) -> Result<i32> {
    let cfg = args.resolve()?;
    let outcome = run(&cfg)?;
    let dir = write_bundle(&outcome)?;
    println!("{} -> {}", cfg.benchmark, dir.display());
    if let Some((epoch, reason)) = &outcome.diverged {
        eprintln!("training diverged at epoch {epoch}: {reason}; last finite parameters saved");
        return Ok(3);
    }
    println!("{}", describe(&outcome.errors));
    Ok(0)
}

fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    let base = args.run.resolve()?;
    let tag = base.case()?.case_tag(base.loss_variant)?;
    if !tag.needs_obstacle() {
        return Err(EviError::Argument(format!(
            "{}: the step-size sweep needs an obstacle problem",
            base.benchmark
        )));
    }
    if args.etas.is_empty() {
        return Err(EviError::Argument("--etas must list at least one value".into()));
    }
    if args.jobs == 0 {
        return Err(EviError::Argument("--jobs must be at least 1".into()));
    }
    let configs = args
        .etas
        .iter()
        .map(|&eta| {
            let mut c = base.clone();
            c.eta = eta;
            c.out_dir = base.out_dir.join(format!("eta_{eta:e}"));
            c.validate().map(|_| c)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut results: Vec<Option<Result<RunOutcome>>> = (0..configs.len()).map(|_| None).collect();
    for (chunk_cfgs, chunk_out) in configs.chunks(args.jobs).zip(results.chunks_mut(args.jobs)) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk_cfgs.iter().map(|c| s.spawn(move || run(c))).collect();
            for (h, slot) in handles.into_iter().zip(chunk_out.iter_mut()) {
                *slot = Some(h.join().unwrap_or_else(|_| Err(EviError::State("run panicked".into()))));
            }
        });
    }

    let mut summary = String::from("eta,l2_rel,linf_rel,status\n");
    let mut code = 0;
    println!("{:>10}  {:>12}  {:>12}  status", "eta", "l2_rel", "linf_rel");
    for (cfg, res) in configs.iter().zip(results) {
        let outcome = res.expect("every run finished")?;
        write_bundle(&outcome)?;
        let status = if outcome.diverged.is_some() {
            code = 3;
            "diverged"
        } else {
            "ok"
        };
        let e = outcome.errors;
        println!("{:>10.1e}  {:>12.6e}  {:>12.6e}  {status}", cfg.eta, e.l2_rel, e.linf_rel);
        let _ = writeln!(summary, "{:e},{:e},{:e},{status}", cfg.eta, e.l2_rel, e.linf_rel);
    }
    fs::create_dir_all(&base.out_dir)?;
    fs::write(base.out_dir.join("sweep_summary.csv"), summary)?;
    Ok(code)
}

/// Uniform evaluation grid of a checkpoint: returns the grid, exact and
/// predicted values and the error norms.
pub fn eval_checkpoint(
    checkpoint: &Path,
    config: &RunConfig,
    grid: usize,
) -> Result<(PointSet, Vec<f64>, Vec<f64>, ErrorMetrics)> {
    if !checkpoint.is_file() {
        return Err(EviError::Argument(format!("checkpoint {} not found", checkpoint.display())));
    }
    let case: BenchmarkCase = config.validate()?;
    let net = read_checkpoint(checkpoint)?;
    if net.sizes() != config.layer_sizes(&case)?.as_slice() {
        return Err(EviError::Argument("checkpoint does not match the configured network".into()));
    }
    let surrogate = config.surrogate(&case, net)?;
    let points = case.domain.grid(grid)?;
    let (exact, pred, errors) = evaluate(&case, &surrogate, &points)?;
    Ok((points, exact, pred, errors))
}

fn cmd_eval(args: &EvalArgs) -> Result<i32> {
    let ckpt_dir = args.checkpoint.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    let config_path = args.config.clone().unwrap_or_else(|| ckpt_dir.join(CONFIG_FILE));
    if !config_path.is_file() {
        return Err(EviError::Argument(format!("config {} not found", config_path.display())));
    }
    let config = read_config(&config_path)?;
    let (points, exact, pred, errors) = eval_checkpoint(&args.checkpoint, &config, args.grid)?;
    let out = args.out.clone().unwrap_or_else(|| ckpt_dir.join(format!("eval_{}", args.grid)));
    fs::create_dir_all(&out)?;
    fs::write(out.join(SOLUTION_FILE), solution_csv(&points, &exact, &pred))?;
    println!("grid={} points={} {}", args.grid, points.len(), describe(&errors));
    Ok(0)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::SweepEta(a) => cmd_sweep(a),
        Command::Eval(a) => cmd_eval(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
