//! Numerical checks of the objects the convergence theory relies on: the
//! stochastic gradient mapping and its bound by the chosen subgradient, the
//! model conditions, the time-interpolated iterate path, and tail sums of
//! the gradient-mapping noise.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::models::{model_value, ModelKind, Regularizer, Sample};
use crate::problems::PhaseRetrievalInstance;
use crate::rng::{sample_unit_sphere, Rng};
use crate::schedules::Schedule;
use crate::solver::StochasticRun;

/// Tolerance for the gradient-mapping bound and the inequality conditions.
pub const MARGIN_TOL: f64 = 1e-9;
/// Tolerance for the model-consistency equality `f_x(x) = f(x)`.
pub const CONSISTENCY_TOL: f64 = 1e-12;

/// `G_alpha(x; s) = (x - x+) / alpha`.
pub fn gradient_mapping(kind: ModelKind, x: &Vector, sample: &Sample<'_>, alpha: f64, reg: Regularizer) -> Result<Vector> {
    let step = kind.step(x, sample, alpha, reg)?;
    Ok((x - step.x_next) / alpha)
}

/// The implemented subgradient of `f(.; s) + phi` at `x`.
pub fn selected_subgradient(x: &Vector, sample: &Sample<'_>, reg: Regularizer) -> Vector {
    sample.subgradient(x) + reg.gradient(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradMapProbe {
    pub sample: usize,
    pub alpha: f64,
    pub grad_map_norm: f64,
    pub subgradient_norm: f64,
    /// `||G(x; s)|| - ||G_alpha(x; s)||`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradMapReport {
    pub kind: ModelKind,
    pub probes: Vec<GradMapProbe>,
}

impl GradMapReport {
    pub fn worst_margin(&self) -> f64 {
        self.probes.iter().map(|p| p.margin).fold(f64::INFINITY, f64::min)
    }

    pub fn violations(&self, tol: f64) -> usize {
        self.probes.iter().filter(|p| p.margin < -tol).count()
    }
}

fn probe_point(d: usize, rng: &mut Rng) -> Result<Vector> {
    Ok(sample_unit_sphere(d, rng)? * (2.0 * rng.uniform()))
}

pub fn check_gradmap_bound(inst: &PhaseRetrievalInstance, kind: ModelKind, probes: usize, seed: u64) -> Result<GradMapReport> {
    check_gradmap_bound_with(inst, kind, Regularizer::None, probes, seed)
}

/// Fuzzes `||G_alpha(x; s)|| <= ||G(x; s)||` with `x` on the sphere scaled
/// by `Uniform[0, 2]`, a uniform sample and `alpha` log-uniform in
/// `[1e-4, 1e2]`.
pub fn check_gradmap_bound_with(
    inst: &PhaseRetrievalInstance,
    kind: ModelKind,
    reg: Regularizer,
    probes: usize,
    seed: u64,
) -> Result<GradMapReport> {
    if probes == 0 {
        return Err(Error::InvalidParameter("need at least one probe".into()));
    }
    let mut rng = Rng::new(seed);
    let mut out = Vec::with_capacity(probes);
    for _ in 0..probes {
        let x = probe_point(inst.d(), &mut rng)?;
        let i = rng.below(inst.n());
        let alpha = 10f64.powf(-4.0 + 6.0 * rng.uniform());
        let s = inst.sample(i)?;
        let gmap = gradient_mapping(kind, &x, &s, alpha, reg)?.norm();
        let g = selected_subgradient(&x, &s, reg).norm();
        out.push(GradMapProbe {
            sample: i,
            alpha,
            grad_map_norm: gmap,
            subgradient_norm: g,
            margin: g - gmap,
        });
    }
    Ok(GradMapReport { kind, probes: out })
}

/// Worst values seen per model condition; slacks should be `>= -tol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConditionReport {
    pub kind: ModelKind,
    pub probes: usize,
    /// Largest `|f_x(x; s) - f(x; s)|`.
    pub consistency_error: f64,
    /// Smallest midpoint-convexity slack of `y -> f_x(y; s)`.
    pub convexity_slack: f64,
    /// Smallest slack of the weak-convexity certificate for the model's
    /// subgradient at `y = x`.
    pub subgradient_slack: f64,
    /// Smallest slack of `f(y) >= f_x(y) - (delta/2) ||y - x||^2`, `delta = 2 ||a||^2`.
    pub lower_bound_slack: f64,
}

impl ModelConditionReport {
    pub fn passes(&self) -> bool {
        self.consistency_error <= CONSISTENCY_TOL
            && self.convexity_slack >= -MARGIN_TOL
            && self.subgradient_slack >= -MARGIN_TOL
            && self.lower_bound_slack >= -MARGIN_TOL
    }
}

pub fn check_model_conditions(
    inst: &PhaseRetrievalInstance,
    kind: ModelKind,
    probes: usize,
    radius: f64,
    seed: u64,
) -> Result<ModelConditionReport> {
    if probes == 0 {
        return Err(Error::InvalidParameter("need at least one probe".into()));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    let radius = match kind {
        ModelKind::GuardedProxPoint { epsilon } => radius.min(epsilon),
        _ => radius,
    };
    let d = inst.d();
    let mut rng = Rng::new(seed);
    let mut report = ModelConditionReport {
        kind,
        probes,
        consistency_error: 0.0,
        convexity_slack: f64::INFINITY,
        subgradient_slack: f64::INFINITY,
        lower_bound_slack: f64::INFINITY,
    };
    for _ in 0..probes {
        let x = probe_point(d, &mut rng)?;
        let s = inst.sample(rng.below(inst.n()))?;
        let lam = s.weak_convexity_constant();
        let y = &x + sample_unit_sphere(d, &mut rng)? * (radius * rng.uniform());
        let z = &x + sample_unit_sphere(d, &mut rng)? * (radius * rng.uniform());
        let mid = (&y + &z) * 0.5;
        let m = |p: &Vector| model_value(kind, &x, p, &s, lam);

        let fx = s.value(&x);
        report.consistency_error = report.consistency_error.max((m(&x)? - fx).abs());

        let (my, mz, mm) = (m(&y)?, m(&z)?, m(&mid)?);
        if my.is_finite() && mz.is_finite() {
            report.convexity_slack = report.convexity_slack.min(0.5 * (my + mz) - mm);
        }

        let g = s.subgradient(&x);
        let dy = &y - &x;
        let q = 0.5 * lam * dy.norm_squared();
        report.subgradient_slack = report.subgradient_slack.min(s.value(&y) - (fx + g.dot(&dy) - q));
        if my.is_finite() {
            report.lower_bound_slack = report.lower_bound_slack.min(s.value(&y) - (my - q));
        }
    }
    Ok(report)
}

/// Piecewise-linear path through iterates at times `t_k = sum_{i<=k} alpha_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatedPath {
    times: Vec<f64>,
    points: Vec<Vector>,
}

impl InterpolatedPath {
    pub fn new(times: Vec<f64>, points: Vec<Vector>) -> Result<Self> {
        if times.is_empty() || times.len() != points.len() {
            return Err(Error::InvalidShape(format!(
                "{} knot times for {} points",
                times.len(),
                points.len()
            )));
        }
        if times.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::InvalidParameter("knot times must increase strictly".into()));
        }
        Ok(InterpolatedPath { times, points })
    }

    /// Path through `x_0, .., x_m` where `x_k` follows a step of size
    /// `alphas[k-1]`; `t_0 = 0`.
    pub fn from_iterates(points: Vec<Vector>, alphas: &[f64]) -> Result<Self> {
        if alphas.len() + 1 != points.len() {
            return Err(Error::InvalidShape("need one stepsize per step".into()));
        }
        let mut times = Vec::with_capacity(points.len());
        let mut t = 0.0;
        times.push(t);
        for &a in alphas {
            t += a;
            times.push(t);
        }
        Self::new(times, points)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    /// Largest segment slope `||x_{k+1} - x_k|| / (t_{k+1} - t_k)`.
    pub fn max_slope(&self) -> f64 {
        (1..self.times.len())
            .map(|k| (&self.points[k] - &self.points[k - 1]).norm() / (self.times[k] - self.times[k - 1]))
            .fold(0.0, f64::max)
    }
}

pub fn interpolate(path: &InterpolatedPath, t: f64) -> Result<Vector> {
    let (first, last) = (path.times[0], *path.times.last().expect("nonempty"));
    if !(t >= first && t <= last) {
        return Err(Error::InvalidParameter(format!("t = {t} outside [{first}, {last}]")));
    }
    let k = path.times.partition_point(|&tk| tk <= t) - 1;
    if path.times[k] == t {
        return Ok(path.points[k].clone());
    }
    let (t0, t1) = (path.times[k], path.times[k + 1]);
    let frac = (t - t0) / (t1 - t0);
    Ok(&path.points[k] + (&path.points[k + 1] - &path.points[k]) * frac)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailWindow {
    /// First iteration of the window (1-based).
    pub start: usize,
    /// Last iteration of the window.
    pub end: usize,
    /// `sup_{start <= m <= end} ||S_m - S_{start-1}||`.
    pub sup_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTailReport {
    pub iterations: usize,
    /// Decade windows `[10^j, 10^{j+1} - 1]` clipped to the run length.
    pub windows: Vec<TailWindow>,
    /// `||S_m||` at the end of each window.
    pub partial_sum_norms: Vec<f64>,
}

impl NoiseTailReport {
    pub fn final_window(&self) -> &TailWindow {
        self.windows.last().expect("at least one window")
    }
}

/// Partial sums `S_m = sum_{k<=m} alpha_k xi_k` with
/// `xi_k = G_{alpha_k}(x_k; s_k) - mean_i G(x_p; i)`, where the exact mean
/// over all `n` samples is refreshed every `probe_every` iterations (at
/// iterate `x_p` with stepsize `alpha_p`) and reused until the next refresh.
pub fn noise_tail(
    inst: &PhaseRetrievalInstance,
    kind: ModelKind,
    schedule: Schedule,
    iters: usize,
    probe_every: usize,
    seed: u64,
) -> Result<NoiseTailReport> {
    if iters == 0 || probe_every == 0 {
        return Err(Error::InvalidParameter("iters and probe_every must be positive".into()));
    }
    let mut run = StochasticRun::seeded(inst, kind, schedule, seed)?;
    let d = inst.d();
    let mut sum = Vector::zeros(d);
    let mut mean = Vector::zeros(d);

    let mut windows = Vec::new();
    let mut partial = Vec::new();
    let mut win_start = 1usize;
    let mut win_end = 9usize.min(iters);
    let mut win_base = sum.clone();
    let mut win_sup = 0.0f64;

    for k in 1..=iters {
        let x = run.x().clone();
        let alpha = run.current_alpha();
        if (k - 1) % probe_every == 0 {
            mean.fill(0.0);
            for i in 0..inst.n() {
                mean += gradient_mapping(kind, &x, &inst.sample(i)?, alpha, run.regularizer())?;
            }
            mean /= inst.n() as f64;
        }
        if run.step().is_none() {
            return Err(Error::Numerical(format!("run diverged at iteration {k}")));
        }
        let g = (&x - run.x()) / alpha;
        sum += (g - &mean) * alpha;
        win_sup = win_sup.max((&sum - &win_base).norm());
        if k == win_end {
            windows.push(TailWindow {
                start: win_start,
                end: win_end,
                sup_norm: win_sup,
            });
            partial.push(sum.norm());
            win_start = win_end + 1;
            win_end = (win_start * 10 - 1).min(iters);
            win_base = sum.clone();
            win_sup = 0.0;
        }
    }
    Ok(NoiseTailReport {
        iterations: iters,
        windows,
        partial_sum_norms: partial,
    })
}

/// One line of `diagnostics.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRow {
    pub check: String,
    pub kind: String,
    pub probes: usize,
    pub worst_margin: f64,
    pub pass: bool,
}

/// Gradient-mapping bound and model conditions for every kind.
pub fn run_diagnostics(inst: &PhaseRetrievalInstance, kinds: &[ModelKind], probes: usize, seed: u64) -> Result<Vec<DiagnosticRow>> {
    let mut rows = Vec::new();
    for (j, &kind) in kinds.iter().enumerate() {
        let kseed = crate::rng::derive_seed(seed, j as u64);
        let gm = check_gradmap_bound(inst, kind, probes, kseed)?;
        let margin = gm.worst_margin();
        rows.push(DiagnosticRow {
            check: "gradmap_bound".into(),
            kind: kind.tag(),
            probes,
            worst_margin: margin,
            pass: margin >= -MARGIN_TOL,
        });
        let mc = check_model_conditions(inst, kind, probes, 0.1, kseed ^ 1)?;
        let checks = [
            ("model_consistency", -mc.consistency_error, -CONSISTENCY_TOL),
            ("model_convexity", mc.convexity_slack, -MARGIN_TOL),
            ("model_subgradient", mc.subgradient_slack, -MARGIN_TOL),
            ("model_lower_bound", mc.lower_bound_slack, -MARGIN_TOL),
        ];
        for (name, margin, floor) in checks {
            rows.push(DiagnosticRow {
                check: name.into(),
                kind: kind.tag(),
                probes,
                worst_margin: margin,
                pass: margin >= floor,
            });
        }
    }
    Ok(rows)
}

pub fn write_diagnostics_csv(path: &Path, rows: &[DiagnosticRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "check,kind,probes,worst_margin,pass")?;
        for r in rows {
            writeln!(w, "{},{},{},{},{}", r.check, r.kind, r.probes, r.worst_margin, r.pass)?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}
