//! Command line front end. Exit status: 0 on success, 1 for invalid
//! arguments or parameters, 2 for file system and CSV failures.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::diagnostics::{run_diagnostics, write_diagnostics_csv};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::harness::config::Settings;
use crate::harness::csvio::{self, TraceRow};
use crate::harness::{run_experiment, run_single_with, summarize_rows, ExperimentSpec, RunOptions};
use crate::models::ModelKind;
use crate::problems::{DesignKind, DesignSpec, NoiseSpec, PhaseRetrievalInstance};
use crate::schedules::{tune_schedule, Schedule, TuningGrid};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "modelprox", version, about = "Stochastic model-based methods for robust phase retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw an instance and write instance.csv and instance.meta.csv.
    Generate {
        #[command(flatten)]
        inst: InstanceArgs,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Run one method on one instance and write traces.csv.
    Run {
        #[command(flatten)]
        inst: InstanceArgs,
        /// Read the instance from a directory written by `generate`.
        #[arg(long = "in", value_name = "DIR")]
        input: Option<PathBuf>,
        #[arg(long, default_value = "proxlin")]
        method: String,
        /// Comma list; with a single beta too this fixes the schedule,
        /// otherwise the pair is tuned by pilot runs.
        #[arg(long)]
        alpha0: Option<String>,
        #[arg(long)]
        beta: Option<String>,
        #[arg(long, default_value_t = 200)]
        passes: usize,
        /// Run seed (start point and sample stream).
        #[arg(long = "run-seed", default_value_t = 1)]
        run_seed: u64,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Run a full experiment suite from a config file and/or flags.
    Experiment(Box<ExperimentArgs>),
    /// Check the gradient-mapping bound and model conditions; writes diagnostics.csv.
    Diagnose {
        #[command(flatten)]
        inst: InstanceArgs,
        /// Comma list of model kinds.
        #[arg(long, default_value = "sgm,proxlin,proxpt,guarded")]
        method: String,
        #[arg(long, default_value_t = 1000)]
        probes: usize,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Recompute summary.csv from a traces.csv.
    Summarize {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct InstanceArgs {
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    d: usize,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    /// ur or ru.
    #[arg(long, default_value = "ur")]
    design: String,
    /// none, laplace:SCALE or corrupt:FRACTION:VARIANCE.
    #[arg(long, default_value = "none")]
    noise: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl InstanceArgs {
    fn build(&self) -> Result<PhaseRetrievalInstance> {
        let design = DesignSpec::new(self.design.parse::<DesignKind>()?, self.kappa)?;
        let noise: NoiseSpec = self.noise.parse()?;
        PhaseRetrievalInstance::generate(self.n, self.d, design, noise, self.seed)
    }
}

/// Flags left unset fall back to the config file, then to the suite defaults.
#[derive(Debug, Args)]
struct ExperimentArgs {
    /// key=value file using the flag names as keys.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// comparison, conditioning or stepsize_grid.
    #[arg(long, alias = "kind")]
    experiment: Option<String>,
    #[arg(long)]
    id: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    kappa: Option<String>,
    #[arg(long)]
    design: Option<String>,
    #[arg(long)]
    noise: Option<String>,
    /// Comma list; proxlin-det is the deterministic baseline.
    #[arg(long)]
    method: Option<String>,
    /// Comma list.
    #[arg(long)]
    alpha0: Option<String>,
    /// Comma list.
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    passes: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    pilot_iters: Option<String>,
    #[arg(long)]
    checkpoint_every: Option<String>,
    #[arg(long)]
    baseline_alpha: Option<String>,
    #[arg(long)]
    baseline_iters: Option<String>,
    /// Run replications one after another on this thread.
    #[arg(long)]
    sequential: bool,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

impl ExperimentArgs {
    fn settings(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(p) => Settings::load(p)?,
            None => Settings::new(),
        };
        let flags = [
            ("experiment", &self.experiment),
            ("id", &self.id),
            ("n", &self.n),
            ("d", &self.d),
            ("kappa", &self.kappa),
            ("design", &self.design),
            ("noise", &self.noise),
            ("method", &self.method),
            ("alpha0", &self.alpha0),
            ("beta", &self.beta),
            ("passes", &self.passes),
            ("reps", &self.reps),
            ("seed", &self.seed),
            ("eps", &self.eps),
            ("pilot_iters", &self.pilot_iters),
            ("checkpoint_every", &self.checkpoint_every),
            ("baseline_alpha", &self.baseline_alpha),
            ("baseline_iters", &self.baseline_iters),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                s.set(k, v.clone());
            }
        }
        Ok(s)
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, raw: &Option<String>) -> Result<Option<Vec<T>>>
where
    T::Err: std::fmt::Display,
{
    let mut s = Settings::new();
    if let Some(v) = raw {
        s.set(key, v.clone());
    }
    s.list(key)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate { inst, out } => {
            let inst = inst.build()?;
            create_dir(&out)?;
            csvio::write_instance(&out, &inst)?;
            println!("wrote {} x {} instance to {}", inst.n(), inst.d(), out.display());
        }
        Command::Run {
            inst,
            input,
            method,
            alpha0,
            beta,
            passes,
            run_seed,
            out,
        } => {
            let kind: ModelKind = method.parse()?;
            let alphas = parse_list::<f64>("alpha0", &alpha0)?;
            let betas = parse_list::<f64>("beta", &beta)?;
            let grid = TuningGrid {
                alpha0_values: alphas.unwrap_or_else(|| TuningGrid::default().alpha0_values),
                beta_values: betas.unwrap_or_else(|| TuningGrid::default().beta_values),
                pilot_iters: None,
            };
            let pairs = grid.pairs()?;
            if passes == 0 {
                return Err(Error::InvalidParameter("budget must be at least one pass".into()));
            }
            let inst = match input {
                Some(dir) => csvio::load_instance(&dir)?,
                None => inst.build()?,
            };
            let schedule: Schedule = match pairs.as_slice() {
                [s] => *s,
                _ => tune_schedule(&inst, kind, &grid, crate::rng::derive_seed(run_seed, 2), Execution::Parallel)?.schedule,
            };
            let trace = run_single_with(&inst, kind, schedule, run_seed, &RunOptions::passes(passes))?;
            let best = trace.best_objective().unwrap_or(f64::NAN);
            let rows: Vec<TraceRow> = trace
                .checkpoints
                .iter()
                .map(|c| TraceRow {
                    experiment_id: "run".into(),
                    method: trace.method.clone(),
                    alpha0: trace.alpha0,
                    beta: trace.beta,
                    rep: 0,
                    pass: c.pass,
                    objective: c.objective,
                    gap: c.objective - best,
                    grad_map_norm: c.grad_map_norm,
                    diverged: trace.diverged,
                })
                .collect();
            create_dir(&out)?;
            csvio::write_traces(&out.join("traces.csv"), &rows)?;
            println!(
                "{} alpha0={} beta={}: final objective {} after {} passes{}",
                trace.method,
                trace.alpha0,
                trace.beta,
                trace.final_objective().unwrap_or(f64::NAN),
                trace.checkpoints.last().map_or(0.0, |c| c.pass),
                if trace.diverged { " (diverged)" } else { "" }
            );
        }
        Command::Experiment(args) => {
            let spec = ExperimentSpec::from_settings(&args.settings()?)?;
            let exec = if args.sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            let results = run_experiment(&spec, &args.out, exec)?;
            println!(
                "{}: {} trace rows, {} summary rows, {} T(eps) rows in {}",
                results.experiment_id,
                results.traces.len(),
                results.summary.len(),
                results.tte.len(),
                args.out.display()
            );
        }
        Command::Diagnose {
            inst,
            method,
            probes,
            out,
        } => {
            let kinds = parse_list::<ModelKind>("method", &Some(method))?.unwrap_or_default();
            if kinds.is_empty() || probes == 0 {
                return Err(Error::InvalidParameter("need at least one method and one probe".into()));
            }
            let seed = inst.seed;
            let inst = inst.build()?;
            let rows = run_diagnostics(&inst, &kinds, probes, seed)?;
            create_dir(&out)?;
            write_diagnostics_csv(&out.join("diagnostics.csv"), &rows)?;
            for r in &rows {
                println!(
                    "{:<18} {:<10} worst margin {:>12.3e}  {}",
                    r.check,
                    r.kind,
                    r.worst_margin,
                    if r.pass { "ok" } else { "FAIL" }
                );
            }
            if rows.iter().any(|r| !r.pass) {
                return Err(Error::Numerical("diagnostic check failed".into()));
            }
        }
        Command::Summarize { input, out } => {
            let rows = csvio::read_traces(&input)?;
            let summary = summarize_rows(&rows)?;
            csvio::write_summary(&out, &summary)?;
            println!("wrote {} summary rows to {}", summary.len(), out.display());
        }
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                EXIT_IO
            } else {
                EXIT_INVALID
            }
        }
    }
}
