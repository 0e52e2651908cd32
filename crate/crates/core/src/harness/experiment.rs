use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::config::Settings;
use super::csvio::{self, InstanceMeta, SummaryRow, TraceRow, TteRow};
use super::run::{run_single_with, time_to_eps, RunOptions};
use super::summary::{gap_reference, summarize_rows};
use crate::baseline::{self, AdmmConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::models::ModelKind;
use crate::problems::{DesignKind, DesignSpec, NoiseSpec, PhaseRetrievalInstance};
use crate::rng::derive_seed;
use crate::schedules::{tune_schedule, Schedule, TuningGrid};
use crate::solver::initial_point;
use crate::trace::RunTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Comparison,
    Conditioning,
    StepsizeGrid,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Comparison => "comparison",
            ExperimentKind::Conditioning => "conditioning",
            ExperimentKind::StepsizeGrid => "stepsize_grid",
        })
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "comparison" => Ok(ExperimentKind::Comparison),
            "conditioning" => Ok(ExperimentKind::Conditioning),
            "stepsize_grid" | "grid" => Ok(ExperimentKind::StepsizeGrid),
            other => Err(Error::InvalidParameter(format!("unknown experiment {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Stochastic(ModelKind),
    /// Full-batch prox-linear iterations solved by ADMM.
    Deterministic,
}

impl Method {
    pub fn tag(&self) -> String {
        match self {
            Method::Stochastic(k) => k.tag(),
            Method::Deterministic => baseline::METHOD_TAG.to_string(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == baseline::METHOD_TAG {
            Ok(Method::Deterministic)
        } else {
            s.parse().map(Method::Stochastic)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleChoice {
    /// Pilot-tuned per replication and method.
    Tuned(TuningGrid),
    Fixed(Schedule),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Defaults to `<kind>-<design><kappa>-<noise>`.
    pub id: Option<String>,
    pub n: usize,
    pub d: usize,
    pub design: DesignSpec,
    pub noise: NoiseSpec,
    pub methods: Vec<Method>,
    /// Comparison and conditioning suites only.
    pub schedule: ScheduleChoice,
    /// Stepsize grid suite only.
    pub alpha0_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub replications: usize,
    pub budget_passes: usize,
    pub epsilon: f64,
    pub master_seed: u64,
    pub checkpoint_every: Option<usize>,
    pub baseline_alpha: f64,
    /// Deterministic outer iterations; `None` means `budget_passes`.
    pub baseline_iters: Option<usize>,
    pub admm: AdmmConfig,
}

pub fn default_alpha0_grid() -> Vec<f64> {
    (0..7).map(|k| 2f64.powi(2 * k - 1)).collect()
}

pub fn default_beta_grid() -> Vec<f64> {
    (0..=10).map(|k| (50 + 5 * k) as f64 / 100.0).collect()
}

impl ExperimentSpec {
    fn base(kind: ExperimentKind, n: usize, d: usize) -> Self {
        let methods = match kind {
            ExperimentKind::StepsizeGrid => vec![
                Method::Stochastic(ModelKind::ProxLinear),
                Method::Stochastic(ModelKind::ProxPoint),
                Method::Stochastic(ModelKind::Subgradient),
            ],
            _ => vec![
                Method::Deterministic,
                Method::Stochastic(ModelKind::ProxLinear),
                Method::Stochastic(ModelKind::Subgradient),
            ],
        };
        ExperimentSpec {
            kind,
            id: None,
            n,
            d,
            design: DesignSpec::well_conditioned(),
            noise: NoiseSpec::Noiseless,
            methods,
            schedule: ScheduleChoice::Tuned(TuningGrid::default()),
            alpha0_grid: default_alpha0_grid(),
            beta_grid: default_beta_grid(),
            replications: 10,
            budget_passes: 200,
            epsilon: 1e-2,
            master_seed: 0,
            checkpoint_every: None,
            baseline_alpha: 1.0,
            baseline_iters: None,
            admm: AdmmConfig::default(),
        }
    }

    pub fn comparison(n: usize, d: usize) -> Self {
        Self::base(ExperimentKind::Comparison, n, d)
    }

    /// `A = U R` with `kappa = 10` and unit Laplace noise.
    pub fn conditioning(n: usize, d: usize) -> Self {
        ExperimentSpec {
            design: DesignSpec {
                kind: DesignKind::Ur,
                kappa: 10.0,
            },
            noise: NoiseSpec::Laplace { scale: 1.0 },
            ..Self::base(ExperimentKind::Conditioning, n, d)
        }
    }

    pub fn stepsize_grid(n: usize, d: usize) -> Self {
        Self::base(ExperimentKind::StepsizeGrid, n, d)
    }

    pub fn experiment_id(&self) -> String {
        self.id.clone().unwrap_or_else(|| {
            let noise = match self.noise.param_string() {
                p if p.is_empty() => self.noise.kind_name().to_string(),
                p => format!("{}{}", self.noise.kind_name(), p.replace(':', "_")),
            };
            format!("{}-{}{}-{}", self.kind, self.design.kind, self.design.kappa, noise)
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidDimension(format!("n = {}, d = {}", self.n, self.d)));
        }
        if self.replications == 0 {
            return Err(Error::InvalidParameter("need at least one replication".into()));
        }
        if self.budget_passes == 0 {
            return Err(Error::InvalidParameter("budget must be at least one pass".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("no methods".into()));
        }
        DesignSpec::new(self.design.kind, self.design.kappa)?;
        self.noise.validate()?;
        for m in &self.methods {
            match m {
                Method::Stochastic(k) => k.validate()?,
                Method::Deterministic if self.kind == ExperimentKind::StepsizeGrid => {
                    return Err(Error::InvalidParameter(
                        "the stepsize grid only covers stochastic methods".into(),
                    ))
                }
                Method::Deterministic => {}
            }
        }
        match self.kind {
            ExperimentKind::StepsizeGrid => {
                if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
                    return Err(Error::InvalidParameter(format!("epsilon {}", self.epsilon)));
                }
                TuningGrid {
                    alpha0_values: self.alpha0_grid.clone(),
                    beta_values: self.beta_grid.clone(),
                    pilot_iters: None,
                }
                .pairs()?;
            }
            _ => match &self.schedule {
                ScheduleChoice::Tuned(g) => {
                    g.pairs()?;
                }
                ScheduleChoice::Fixed(_) => {}
            },
        }
        if !(self.baseline_alpha.is_finite() && self.baseline_alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("baseline alpha {}", self.baseline_alpha)));
        }
        if self.baseline_iters == Some(0) || self.checkpoint_every == Some(0) {
            return Err(Error::InvalidParameter("iteration counts must be positive".into()));
        }
        self.admm.validate()
    }

    /// Builds a spec from settings keyed like the CLI flags: `experiment`,
    /// `n`, `d`, `design`, `kappa`, `noise`, `method`, `alpha0`, `beta`,
    /// `passes`, `reps`, `seed`, `eps`, `id`, `pilot_iters`,
    /// `checkpoint_every`, `baseline_alpha`, `baseline_iters`, `rho`.
    ///
    /// For the comparison suites a single `alpha0` and `beta` fix the
    /// schedule; lists replace the tuning grid.
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let kind: ExperimentKind = s.get_or("experiment", ExperimentKind::Comparison)?;
        let n = s.get_or("n", 500)?;
        let d = s.get_or("d", 50)?;
        let mut spec = match kind {
            ExperimentKind::Comparison => Self::comparison(n, d),
            ExperimentKind::Conditioning => Self::conditioning(n, d),
            ExperimentKind::StepsizeGrid => Self::stepsize_grid(n, d),
        };
        let design_kind = s.get_or("design", spec.design.kind)?;
        let kappa = s.get_or("kappa", spec.design.kappa)?;
        spec.design = DesignSpec::new(design_kind, kappa)?;
        spec.noise = s.get_or("noise", spec.noise)?;
        if let Some(m) = s.list::<Method>("method")? {
            spec.methods = m;
        }
        let alphas = s.list::<f64>("alpha0")?;
        let betas = s.list::<f64>("beta")?;
        for &b in betas.iter().flatten() {
            if !(0.5..=1.0).contains(&b) {
                return Err(Error::InvalidParameter(format!("beta {b} outside [0.5, 1]")));
            }
        }
        for &a in alphas.iter().flatten() {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::InvalidParameter(format!("alpha0 {a} must be positive")));
            }
        }
        match kind {
            ExperimentKind::StepsizeGrid => {
                if let Some(a) = alphas {
                    spec.alpha0_grid = a;
                }
                if let Some(b) = betas {
                    spec.beta_grid = b;
                }
            }
            _ => {
                let mut grid = TuningGrid::default();
                if let Some(a) = alphas {
                    grid.alpha0_values = a;
                }
                if let Some(b) = betas {
                    grid.beta_values = b;
                }
                grid.pilot_iters = s.get("pilot_iters")?;
                spec.schedule = match (grid.alpha0_values.as_slice(), grid.beta_values.as_slice()) {
                    ([a], [b]) => ScheduleChoice::Fixed(Schedule::new(*a, *b)?),
                    _ => ScheduleChoice::Tuned(grid),
                };
            }
        }
        spec.id = s.get("id")?;
        spec.replications = s.get_or("reps", spec.replications)?;
        spec.budget_passes = s.get_or("passes", spec.budget_passes)?;
        spec.epsilon = s.get_or("eps", spec.epsilon)?;
        spec.master_seed = s.get_or("seed", spec.master_seed)?;
        spec.checkpoint_every = s.get("checkpoint_every")?;
        spec.baseline_alpha = s.get_or("baseline_alpha", spec.baseline_alpha)?;
        spec.baseline_iters = s.get("baseline_iters")?;
        spec.admm.rho = s.get_or("rho", spec.admm.rho)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Everything one replication of a comparison suite produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub rep: usize,
    pub instance: InstanceMeta,
    /// One trace per method, in spec order.
    pub traces: Vec<RunTrace>,
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResults {
    pub experiment_id: String,
    pub kind: ExperimentKind,
    pub instances: Vec<InstanceMeta>,
    pub replications: Vec<Replication>,
    pub traces: Vec<TraceRow>,
    pub summary: Vec<SummaryRow>,
    pub tte: Vec<TteRow>,
}

struct RepSeeds {
    instance: u64,
    run: u64,
    tuning: u64,
}

fn rep_seeds(master: u64, rep: usize) -> RepSeeds {
    let s = derive_seed(master, rep as u64);
    RepSeeds {
        instance: derive_seed(s, 0),
        run: derive_seed(s, 1),
        tuning: derive_seed(s, 2),
    }
}

fn rep_instance(spec: &ExperimentSpec, rep: usize) -> Result<PhaseRetrievalInstance> {
    PhaseRetrievalInstance::generate(
        spec.n,
        spec.d,
        spec.design,
        spec.noise,
        rep_seeds(spec.master_seed, rep).instance,
    )
}

fn run_replication(spec: &ExperimentSpec, rep: usize, exec: Execution) -> Result<Replication> {
    let seeds = rep_seeds(spec.master_seed, rep);
    let inst = rep_instance(spec, rep)?;
    let mut traces = Vec::with_capacity(spec.methods.len());
    for m in &spec.methods {
        let trace = match *m {
            Method::Stochastic(kind) => {
                let schedule = match &spec.schedule {
                    ScheduleChoice::Fixed(s) => *s,
                    ScheduleChoice::Tuned(grid) => tune_schedule(&inst, kind, grid, seeds.tuning, exec)?.schedule,
                };
                let opts = RunOptions {
                    checkpoint_every: spec.checkpoint_every,
                    ..RunOptions::passes(spec.budget_passes)
                };
                run_single_with(&inst, kind, schedule, seeds.run, &opts)?
            }
            Method::Deterministic => {
                let x0 = initial_point(spec.d, seeds.run)?;
                let iters = spec.baseline_iters.unwrap_or(spec.budget_passes);
                let mut t = baseline::prox_linear_outer(&inst, &x0, spec.baseline_alpha, iters, &spec.admm)?;
                t.seed = seeds.run;
                t
            }
        };
        traces.push(trace);
    }
    let reference = gap_reference(&traces)?;
    Ok(Replication {
        rep,
        instance: InstanceMeta::of(&inst),
        traces,
        reference,
    })
}

/// Runs the suite in memory. Replications (or grid cells) are independent
/// tasks; results are assembled in spec order whatever `exec` is.
pub fn execute(spec: &ExperimentSpec, exec: Execution) -> Result<ExperimentResults> {
    spec.validate()?;
    let id = spec.experiment_id();
    match spec.kind {
        ExperimentKind::StepsizeGrid => execute_grid(spec, id, exec),
        _ => {
            let reps = exec
                .map_range(spec.replications, |j| run_replication(spec, j, exec))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            let mut rows = Vec::new();
            // method-major so each method's replications sit together
            for (mi, m) in spec.methods.iter().enumerate() {
                let tag = m.tag();
                for r in &reps {
                    let t = &r.traces[mi];
                    for c in &t.checkpoints {
                        rows.push(TraceRow {
                            experiment_id: id.clone(),
                            method: tag.clone(),
                            alpha0: t.alpha0,
                            beta: t.beta,
                            rep: r.rep,
                            pass: c.pass,
                            objective: c.objective,
                            gap: c.objective - r.reference,
                            grad_map_norm: c.grad_map_norm,
                            diverged: t.diverged,
                        });
                    }
                }
            }
            let summary = summarize_rows(&rows)?;
            Ok(ExperimentResults {
                experiment_id: id,
                kind: spec.kind,
                instances: reps.iter().map(|r| r.instance.clone()).collect(),
                replications: reps,
                traces: rows,
                summary,
                tte: Vec::new(),
            })
        }
    }
}

fn execute_grid(spec: &ExperimentSpec, id: String, exec: Execution) -> Result<ExperimentResults> {
    let instances = exec
        .map_range(spec.replications, |j| rep_instance(spec, j))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let cap = spec.budget_passes * spec.n;
    let mut cells = Vec::new();
    for m in &spec.methods {
        let Method::Stochastic(kind) = *m else {
            unreachable!("validated")
        };
        for &a in &spec.alpha0_grid {
            for &b in &spec.beta_grid {
                for rep in 0..spec.replications {
                    cells.push((kind, Schedule::new(a, b)?, rep));
                }
            }
        }
    }
    let tte = exec
        .map(&cells, |&(kind, schedule, rep)| -> Result<TteRow> {
            let seed = rep_seeds(spec.master_seed, rep).run;
            let t = time_to_eps(&instances[rep], kind, schedule, seed, cap, spec.epsilon)?;
            Ok(TteRow {
                experiment_id: id.clone(),
                method: kind.tag(),
                alpha0: schedule.alpha0(),
                beta: schedule.beta(),
                rep,
                t: t.t,
                capped: t.capped,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResults {
        experiment_id: id,
        kind: spec.kind,
        instances: instances.iter().map(InstanceMeta::of).collect(),
        replications: Vec::new(),
        traces: Vec::new(),
        summary: Vec::new(),
        tte,
    })
}

impl ExperimentResults {
    /// Writes `instance.meta.csv` plus `traces.csv` and `summary.csv`, or
    /// `tte.csv` for the stepsize grid. Returns the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let meta = dir.join("instance.meta.csv");
        csvio::write_instance_meta(&meta, &self.instances)?;
        written.push(meta);
        if self.kind == ExperimentKind::StepsizeGrid {
            let p = dir.join("tte.csv");
            csvio::write_tte(&p, &self.tte)?;
            written.push(p);
        } else {
            let p = dir.join("traces.csv");
            csvio::write_traces(&p, &self.traces)?;
            written.push(p);
            let p = dir.join("summary.csv");
            csvio::write_summary(&p, &self.summary)?;
            written.push(p);
        }
        Ok(written)
    }
}

pub fn run_experiment(spec: &ExperimentSpec, dir: &Path, exec: Execution) -> Result<ExperimentResults> {
    let results = execute(spec, exec)?;
    results.write(dir)?;
    Ok(results)
}
