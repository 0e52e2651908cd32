//! Stepsize laws `alpha_k = alpha0 k^(-beta)` and pilot-run tuning.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::models::ModelKind;
use crate::problems::PhaseRetrievalInstance;
use crate::solver::StochasticRun;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    alpha0: f64,
    beta: f64,
}

impl Schedule {
    /// `alpha0 > 0` and `beta` in `[0.5, 1]`.
    pub fn new(alpha0: f64, beta: f64) -> Result<Self> {
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha0 must be positive, got {alpha0}")));
        }
        if !(0.5..=1.0).contains(&beta) {
            return Err(Error::InvalidParameter(format!("beta must lie in [0.5, 1], got {beta}")));
        }
        Ok(Schedule { alpha0, beta })
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `alpha0 k^(-beta)` for `k >= 1`.
    pub fn stepsize_at(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::InvalidParameter("stepsize index starts at 1".into()));
        }
        Ok(self.alpha(k))
    }

    pub(crate) fn alpha(&self, k: usize) -> f64 {
        self.alpha0 * (k as f64).powf(-self.beta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningGrid {
    pub alpha0_values: Vec<f64>,
    pub beta_values: Vec<f64>,
    /// Pilot length; `None` means `3 n`.
    pub pilot_iters: Option<usize>,
}

impl Default for TuningGrid {
    fn default() -> Self {
        TuningGrid {
            alpha0_values: vec![1.0, 10.0, 100.0, 1000.0],
            beta_values: vec![0.6, 0.7, 0.8, 0.9],
            pilot_iters: None,
        }
    }
}

impl TuningGrid {
    pub fn pairs(&self) -> Result<Vec<Schedule>> {
        if self.alpha0_values.is_empty() || self.beta_values.is_empty() {
            return Err(Error::InvalidParameter("tuning grid is empty".into()));
        }
        if self.pilot_iters == Some(0) {
            return Err(Error::InvalidParameter("pilot length must be positive".into()));
        }
        let mut out = Vec::with_capacity(self.alpha0_values.len() * self.beta_values.len());
        for &a in &self.alpha0_values {
            for &b in &self.beta_values {
                out.push(Schedule::new(a, b)?);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotOutcome {
    pub schedule: Schedule,
    /// Smallest finite objective after a pilot step, if any.
    pub best_objective: Option<f64>,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TunedSchedule {
    pub schedule: Schedule,
    pub pilots: Vec<PilotOutcome>,
    /// Every pilot diverged; the choice rests on pre-divergence values.
    pub all_diverged: bool,
}

/// Runs a pilot per grid pair from the same start and sample stream (both
/// keyed by `seed`) and keeps the pair with the smallest objective seen
/// after any pilot step. Ties go to the smaller `alpha0`, then `beta`.
pub fn tune_schedule(
    inst: &PhaseRetrievalInstance,
    kind: ModelKind,
    grid: &TuningGrid,
    seed: u64,
    exec: Execution,
) -> Result<TunedSchedule> {
    let pairs = grid.pairs()?;
    let iters = grid.pilot_iters.unwrap_or(3 * inst.n());
    let pilots = exec.map(&pairs, |&schedule| -> Result<PilotOutcome> {
        let mut run = StochasticRun::seeded(inst, kind, schedule, seed)?;
        let mut best: Option<f64> = None;
        for _ in 0..iters {
            if run.step().is_none() {
                break;
            }
            let f = inst.objective_unchecked(run.x());
            if !f.is_finite() {
                run.mark_diverged();
                break;
            }
            best = Some(best.map_or(f, |b| b.min(f)));
        }
        Ok(PilotOutcome {
            schedule,
            best_objective: best,
            diverged: run.diverged(),
        })
    });
    let pilots = pilots.into_iter().collect::<Result<Vec<_>>>()?;

    let chosen = select_pilot(&pilots);
    Ok(TunedSchedule {
        schedule: chosen,
        all_diverged: pilots.iter().all(|p| p.diverged),
        pilots,
    })
}

/// Smallest pilot minimum, then smaller `alpha0`, then smaller `beta`.
fn select_pilot(pilots: &[PilotOutcome]) -> Schedule {
    let key = |p: &PilotOutcome| (p.best_objective.unwrap_or(f64::INFINITY), p.schedule.alpha0, p.schedule.beta);
    pilots
        .iter()
        .min_by(|p, q| {
            let (a, b) = (key(p), key(q));
            a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2))
        })
        .expect("grid is nonempty")
        .schedule
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{DesignSpec, NoiseSpec};

    #[test]
    fn stepsize_examples() {
        assert_eq!(Schedule::new(10.0, 0.5).unwrap().stepsize_at(4).unwrap(), 5.0);
        assert_eq!(Schedule::new(3.5, 0.8).unwrap().stepsize_at(1).unwrap(), 3.5);
        let s = Schedule::new(1.0, 1.0).unwrap();
        assert!((s.stepsize_at(1000).unwrap() - 0.001).abs() < 1e-18);
        assert!(s.stepsize_at(0).is_err());
        assert!(Schedule::new(1.0, 0.3).is_err());
        assert!(Schedule::new(0.0, 0.7).is_err());
    }

    #[test]
    fn robbins_monro_sums() {
        // sum alpha_k keeps growing; sum alpha_k^2 has geometrically shrinking
        // increments over doubling windows, ratio 2^(1 - 2 beta).
        for beta in [0.6, 0.75, 0.9, 1.0] {
            let s = Schedule::new(1.0, beta).unwrap();
            let mut lin = 0.0;
            let mut sq = 0.0;
            let mut windows_lin = Vec::new();
            let mut windows_sq = Vec::new();
            let mut next = 1usize << 10;
            for k in 1..=(1usize << 20) {
                let a = s.alpha(k);
                lin += a;
                sq += a * a;
                if k == next {
                    windows_lin.push(lin);
                    windows_sq.push(sq);
                    next *= 2;
                }
            }
            let inc_lin: Vec<f64> = windows_lin.windows(2).map(|w| w[1] - w[0]).collect();
            let inc_sq: Vec<f64> = windows_sq.windows(2).map(|w| w[1] - w[0]).collect();
            assert!(inc_lin.iter().all(|&d| d >= 0.69), "beta {beta}: {inc_lin:?}");
            let ratio = 2f64.powf(1.0 - 2.0 * beta);
            for w in inc_sq.windows(2) {
                assert!((w[1] / w[0] - ratio).abs() < 1e-2, "beta {beta}");
            }
            let bound = (1u64 << 20) as f64;
            let tail_bound = bound.powf(1.0 - 2.0 * beta) / (2.0 * beta - 1.0);
            assert!(tail_bound / sq < 0.1, "beta {beta}");
        }
    }

    fn inst() -> PhaseRetrievalInstance {
        PhaseRetrievalInstance::generate(40, 6, DesignSpec::well_conditioned(), NoiseSpec::Noiseless, 5).unwrap()
    }

    #[test]
    fn single_pair_grid() {
        let grid = TuningGrid {
            alpha0_values: vec![7.0],
            beta_values: vec![0.65],
            pilot_iters: Some(20),
        };
        let t = tune_schedule(&inst(), ModelKind::ProxLinear, &grid, 1, Execution::Sequential).unwrap();
        assert_eq!(t.schedule, Schedule::new(7.0, 0.65).unwrap());
    }

    #[test]
    fn default_grid_is_deterministic() {
        let i = inst();
        let a = tune_schedule(&i, ModelKind::Subgradient, &TuningGrid::default(), 3, Execution::Parallel).unwrap();
        let b = tune_schedule(&i, ModelKind::Subgradient, &TuningGrid::default(), 3, Execution::Sequential).unwrap();
        assert_eq!(a.pilots.len(), 16);
        assert_eq!(a, b);
    }

    #[test]
    fn ties_prefer_smaller_alpha0_then_beta() {
        let outcome = |a0, b, best| PilotOutcome {
            schedule: Schedule::new(a0, b).unwrap(),
            best_objective: best,
            diverged: false,
        };
        let pilots = [
            outcome(100.0, 0.6, Some(0.25)),
            outcome(10.0, 0.9, Some(0.25)),
            outcome(10.0, 0.7, Some(0.25)),
            outcome(1.0, 0.6, Some(0.5)),
            outcome(1000.0, 0.6, None),
        ];
        assert_eq!(select_pilot(&pilots), Schedule::new(10.0, 0.7).unwrap());
        let diverged = [outcome(1.0, 0.6, None), outcome(10.0, 0.6, Some(3.0))];
        assert_eq!(select_pilot(&diverged), Schedule::new(10.0, 0.6).unwrap());
    }

    #[test]
    fn duplicate_grid_entries_tie() {
        let grid = TuningGrid {
            alpha0_values: vec![10.0, 10.0],
            beta_values: vec![0.8],
            pilot_iters: Some(30),
        };
        let t = tune_schedule(&inst(), ModelKind::ProxPoint, &grid, 2, Execution::Sequential).unwrap();
        assert_eq!(t.pilots[0], t.pilots[1]);
        assert_eq!(t.schedule, Schedule::new(10.0, 0.8).unwrap());
    }

    #[test]
    fn empty_grid_is_an_error() {
        let grid = TuningGrid {
            alpha0_values: vec![],
            ..TuningGrid::default()
        };
        assert!(tune_schedule(&inst(), ModelKind::ProxLinear, &grid, 1, Execution::Sequential).is_err());
    }
}
