use crate::diagnostics::gradient_mapping;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::models::{ModelKind, Regularizer};
use crate::problems::PhaseRetrievalInstance;
use crate::schedules::Schedule;
use crate::solver::{initial_point, sample_stream, StochasticRun};
use crate::trace::RunTrace;

/// Samples averaged for the checkpoint gradient-mapping norm.
pub const PROBE_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub budget_passes: usize,
    /// Iterations between checkpoints; `None` means once per pass (`n`).
    pub checkpoint_every: Option<usize>,
    /// Overrides the seeded starting point.
    pub x0: Option<Vector>,
    pub regularizer: Regularizer,
    /// Ball projection for the subgradient method.
    pub projection_radius: Option<f64>,
}

impl RunOptions {
    pub fn passes(budget_passes: usize) -> Self {
        RunOptions {
            budget_passes,
            checkpoint_every: None,
            x0: None,
            regularizer: Regularizer::None,
            projection_radius: None,
        }
    }
}

fn probe_indices(n: usize) -> Vec<usize> {
    let m = n.min(PROBE_SAMPLES);
    (0..m).map(|j| j * n / m).collect()
}

fn mean_grad_map_norm(run: &StochasticRun<'_>, inst: &PhaseRetrievalInstance, probes: &[usize]) -> Result<f64> {
    let alpha = run.current_alpha();
    let mut mean = Vector::zeros(inst.d());
    for &i in probes {
        mean += gradient_mapping(run.kind(), run.x(), &inst.sample(i)?, alpha, run.regularizer())?;
    }
    Ok(mean.norm() / probes.len() as f64)
}

pub fn run_single(
    inst: &PhaseRetrievalInstance,
    kind: ModelKind,
    schedule: Schedule,
    seed: u64,
    budget_passes: usize,
    checkpoint_every: usize,
) -> Result<RunTrace> {
    let opts = RunOptions {
        checkpoint_every: Some(checkpoint_every),
        ..RunOptions::passes(budget_passes)
    };
    run_single_with(inst, kind, schedule, seed, &opts)
}

/// `budget_passes * n` steps; checkpoints at step 0, every
/// `checkpoint_every` steps and at the last step. A non-finite iterate or
/// objective ends the trace and marks it diverged.
pub fn run_single_with(
    inst: &PhaseRetrievalInstance,
    kind: ModelKind,
    schedule: Schedule,
    seed: u64,
    opts: &RunOptions,
) -> Result<RunTrace> {
    if opts.budget_passes == 0 {
        return Err(Error::InvalidParameter("budget must be at least one pass".into()));
    }
    let n = inst.n();
    let every = opts.checkpoint_every.unwrap_or(n);
    if every == 0 {
        return Err(Error::InvalidParameter("checkpoint interval must be positive".into()));
    }
    let x0 = match &opts.x0 {
        Some(x) => x.clone(),
        None => initial_point(inst.d(), seed)?,
    };
    let mut run = StochasticRun::new(inst, kind, schedule, x0, sample_stream(seed))?.with_regularizer(opts.regularizer)?;
    if let Some(r) = opts.projection_radius {
        run = run.with_projection(r)?;
    }

    let probes = probe_indices(n);
    let total = opts.budget_passes * n;
    let mut trace = RunTrace::new(kind.tag(), schedule.alpha0(), schedule.beta(), seed);
    for s in 0..=total {
        if s > 0 && run.step().is_none() {
            trace.diverged = true;
            break;
        }
        if s % every == 0 || s == total {
            let f = inst.objective(run.x())?;
            if !f.is_finite() {
                trace.diverged = true;
                break;
            }
            let g = mean_grad_map_norm(&run, inst, &probes)?;
            trace.push(s as f64 / n as f64, f, g);
        }
    }
    Ok(trace)
}

/// First iterate reaching `f <= eps`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeToEps {
    /// 1-based iterate index (the start is iterate 1), or the cap.
    pub t: usize,
    pub capped: bool,
}

/// `T(eps) = min { k : f(x_k) <= eps }` over iterates `x_1 .. x_cap`, where
/// `x_1` is the seeded start; `cap` (flagged) when no iterate qualifies.
pub fn time_to_eps(
    inst: &PhaseRetrievalInstance,
    kind: ModelKind,
    schedule: Schedule,
    seed: u64,
    cap: usize,
    eps: f64,
) -> Result<TimeToEps> {
    if cap == 0 {
        return Err(Error::InvalidParameter("cap must be positive".into()));
    }
    let mut run = StochasticRun::seeded(inst, kind, schedule, seed)?;
    for k in 1..=cap {
        if inst.objective_unchecked(run.x()) <= eps {
            return Ok(TimeToEps { t: k, capped: false });
        }
        if k < cap && run.step().is_none() {
            break;
        }
    }
    Ok(TimeToEps { t: cap, capped: true })
}
