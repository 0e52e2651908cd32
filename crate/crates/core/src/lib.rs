//! Stochastic model-based minimization for weakly convex composite objectives.
//!
//! Each iteration draws a sample `s`, builds a convex local model `f_x(.; s)`
//! of the sampled loss around the current point and takes a proximal step on
//! it. Four model families are provided (subgradient, prox-linear,
//! proximal-point and its guarded variant), all with exact one-step solvers
//! for the robust phase retrieval loss `|<a, x>^2 - b|`.
//!
//! The crate also carries a deterministic prox-linear baseline backed by an
//! ADMM subproblem solver, stepsize schedules with a pilot-run tuner, a
//! seeded experiment harness writing CSV, and numerical diagnostics for the
//! gradient mapping and the model conditions.

pub mod baseline;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod problems;
pub mod rng;
pub mod schedules;
pub mod solver;
pub mod trace;

pub use error::{Error, Result};
pub use exec::Execution;
pub use linalg::{Matrix, Vector};
pub use models::{ModelKind, Regularizer, Sample, StepResult};
pub use problems::{DesignKind, DesignSpec, NoiseSpec, PhaseRetrievalInstance};
pub use rng::Rng;
pub use schedules::{Schedule, TuningGrid};
pub use trace::{Checkpoint, RunTrace};
