//! Deterministic prox-linear method.
//!
//! Each outer iteration solves
//!
//! ```text
//! min_z (1/n) ||C z + r||_1 + ||z||^2 / (2 alpha)
//! ```
//!
//! with `C_i = 2 <a_i, x_k> a_i^T` and `r_i = <a_i, x_k>^2 - b_i`, then sets
//! `x_{k+1} = x_k + z`. The subproblem is solved by ADMM on the splitting
//! `u = C z + r`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, Vector};
use crate::problems::PhaseRetrievalInstance;
use crate::trace::RunTrace;

pub const METHOD_TAG: &str = "proxlin-det";

#[derive(Debug, Clone, PartialEq)]
pub struct QpSubproblem {
    pub c: DMatrix<f64>,
    pub r: DVector<f64>,
    pub center: Vector,
    pub alpha: f64,
}

impl QpSubproblem {
    pub fn new(c: DMatrix<f64>, r: DVector<f64>, center: Vector, alpha: f64) -> Result<Self> {
        if c.nrows() != r.len() {
            return Err(Error::DimensionMismatch {
                expected: c.nrows(),
                got: r.len(),
            });
        }
        if c.ncols() != center.len() {
            return Err(Error::DimensionMismatch {
                expected: c.ncols(),
                got: center.len(),
            });
        }
        if c.nrows() == 0 || c.ncols() == 0 {
            return Err(Error::InvalidShape("empty subproblem".into()));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        Ok(QpSubproblem { c, r, center, alpha })
    }

    /// Linearization of the instance at `x`.
    pub fn at(inst: &PhaseRetrievalInstance, x: &Vector, alpha: f64) -> Result<Self> {
        if x.len() != inst.d() {
            return Err(Error::DimensionMismatch {
                expected: inst.d(),
                got: x.len(),
            });
        }
        let (n, d) = (inst.n(), inst.d());
        let mut c = DMatrix::zeros(n, d);
        let mut r = DVector::zeros(n);
        for i in 0..n {
            let s = inst.sample(i)?;
            let t = s.inner(x);
            r[i] = t * t - s.b();
            for (j, aij) in s.a().iter().enumerate() {
                c[(i, j)] = 2.0 * t * aij;
            }
        }
        QpSubproblem::new(c, r, x.clone(), alpha)
    }

    pub fn objective(&self, z: &Vector) -> f64 {
        let lin = &self.c * z + &self.r;
        lin.lp_norm(1) / self.r.len() as f64 + z.norm_squared() / (2.0 * self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmConfig {
    pub rho: f64,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub max_iter: usize,
    /// Refactor the normal matrix every iteration instead of once.
    pub refactor_each_iter: bool,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            rho: 1.0,
            tol_primal: 1e-8,
            tol_dual: 1e-8,
            max_iter: 10_000,
            refactor_each_iter: false,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rho > 0.0 && self.tol_primal > 0.0 && self.tol_dual > 0.0 && self.max_iter > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad ADMM config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmSolution {
    /// Best iterate by subproblem objective (never worse than `z = 0`).
    pub z: Vector,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
}

fn soft_threshold(v: f64, level: f64) -> f64 {
    v.signum() * (v.abs() - level).max(0.0)
}

pub fn solve_subproblem(sub: &QpSubproblem, cfg: &AdmmConfig) -> Result<AdmmSolution> {
    cfg.validate()?;
    let (n, d) = sub.c.shape();
    let rho = cfg.rho;
    let ct = sub.c.transpose();
    let normal = {
        let mut m = &ct * &sub.c * rho;
        for j in 0..d {
            m[(j, j)] += 1.0 / sub.alpha;
        }
        m
    };
    let factor = || {
        normal
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("normal matrix is not positive definite".into()))
    };
    let mut chol = factor()?;

    let level = 1.0 / (n as f64 * rho);
    let mut z = Vector::zeros(d);
    let mut u = sub.r.clone();
    let mut w = DVector::zeros(n);
    let mut best_z = z.clone();
    let mut best_obj = sub.objective(&z);
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=cfg.max_iter {
        iterations = it;
        if cfg.refactor_each_iter {
            chol = factor()?;
        }
        let rhs = &ct * (&u - &sub.r - &w) * rho;
        z = chol.solve(&rhs);
        let cz_r = &sub.c * &z + &sub.r;
        let u_prev = std::mem::replace(&mut u, (&cz_r + &w).map(|v| soft_threshold(v, level)));
        let gap = &cz_r - &u;
        w += &gap;

        let obj = cz_r.lp_norm(1) / n as f64 + z.norm_squared() / (2.0 * sub.alpha);
        if obj < best_obj {
            best_obj = obj;
            best_z.copy_from(&z);
        }
        primal = gap.norm();
        dual = rho * (&ct * (&u - &u_prev)).norm();
        if !primal.is_finite() || !dual.is_finite() {
            return Err(Error::Numerical("ADMM residuals are not finite".into()));
        }
        if primal <= cfg.tol_primal * (1.0 + u.norm()) && dual <= cfg.tol_dual {
            converged = true;
            break;
        }
    }
    Ok(AdmmSolution {
        z: best_z,
        objective: best_obj,
        iterations,
        primal_residual: primal,
        dual_residual: dual,
        converged,
    })
}

/// Runs `iters` outer iterations from `x0`. Checkpoint `k` records
/// `f(x_k)` and the deterministic gradient-mapping norm `||z_k|| / alpha`.
pub fn prox_linear_outer(
    inst: &PhaseRetrievalInstance,
    x0: &Vector,
    alpha: f64,
    iters: usize,
    cfg: &AdmmConfig,
) -> Result<RunTrace> {
    if iters == 0 {
        return Err(Error::InvalidParameter("need at least one outer iteration".into()));
    }
    let mut trace = RunTrace::new(METHOD_TAG, alpha, 0.0, inst.seed());
    let mut x = x0.clone();
    for k in 0..=iters {
        let f = inst.objective(&x)?;
        if !f.is_finite() || !all_finite(&x) {
            trace.diverged = true;
            break;
        }
        let sub = QpSubproblem::at(inst, &x, alpha)?;
        let sol = solve_subproblem(&sub, cfg)?;
        if !sol.converged {
            trace.unconverged_subproblems += 1;
        }
        trace.push(k as f64, f, sol.z.norm() / alpha);
        if k < iters {
            x += &sol.z;
        }
    }
    Ok(trace)
}
