//! The stochastic model-based iteration: draw `i` uniformly, step with
//! `alpha_k`, repeat.

use crate::error::{Error, Result};
use crate::linalg::{all_finite, Vector};
use crate::models::{ModelKind, Regularizer};
use crate::problems::PhaseRetrievalInstance;
use crate::rng::{sample_unit_sphere, Rng};
use crate::schedules::Schedule;

/// Starting point of every run keyed by `seed`: uniform on the unit sphere.
pub fn initial_point(d: usize, seed: u64) -> Result<Vector> {
    sample_unit_sphere(d, &mut Rng::derive(seed, 0))
}

/// Sample-index stream of every run keyed by `seed`.
pub fn sample_stream(seed: u64) -> Rng {
    Rng::derive(seed, 1)
}

#[derive(Debug, Clone)]
pub struct StochasticRun<'a> {
    inst: &'a PhaseRetrievalInstance,
    kind: ModelKind,
    schedule: Schedule,
    reg: Regularizer,
    projection_radius: Option<f64>,
    x: Vector,
    k: usize,
    rng: Rng,
    diverged: bool,
}

impl<'a> StochasticRun<'a> {
    pub fn new(inst: &'a PhaseRetrievalInstance, kind: ModelKind, schedule: Schedule, x0: Vector, rng: Rng) -> Result<Self> {
        kind.validate()?;
        if x0.len() != inst.d() {
            return Err(Error::DimensionMismatch {
                expected: inst.d(),
                got: x0.len(),
            });
        }
        if !all_finite(&x0) {
            return Err(Error::NonFinite("initial point"));
        }
        Ok(StochasticRun {
            inst,
            kind,
            schedule,
            reg: Regularizer::None,
            projection_radius: None,
            x: x0,
            k: 1,
            rng,
            diverged: false,
        })
    }

    /// Run keyed by `seed` through [`initial_point`] and [`sample_stream`].
    pub fn seeded(inst: &'a PhaseRetrievalInstance, kind: ModelKind, schedule: Schedule, seed: u64) -> Result<Self> {
        Self::new(inst, kind, schedule, initial_point(inst.d(), seed)?, sample_stream(seed))
    }

    pub fn with_regularizer(mut self, reg: Regularizer) -> Result<Self> {
        reg.validate()?;
        if matches!(self.kind, ModelKind::GuardedProxPoint { .. }) && reg != Regularizer::None {
            return Err(Error::InvalidParameter("the guarded model takes no regularizer".into()));
        }
        self.reg = reg;
        Ok(self)
    }

    /// Project subgradient iterates onto the ball of the given radius.
    pub fn with_projection(mut self, radius: f64) -> Result<Self> {
        if self.kind != ModelKind::Subgradient {
            return Err(Error::InvalidParameter("projection is only offered for the subgradient method".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("projection radius must be positive, got {radius}")));
        }
        self.projection_radius = Some(radius);
        Ok(self)
    }

    pub fn x(&self) -> &Vector {
        &self.x
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn regularizer(&self) -> Regularizer {
        self.reg
    }

    pub fn steps_taken(&self) -> usize {
        self.k - 1
    }

    /// Stepsize the next step will use.
    pub fn current_alpha(&self) -> f64 {
        self.schedule.alpha(self.k)
    }

    pub fn diverged(&self) -> bool {
        self.diverged
    }

    pub fn mark_diverged(&mut self) {
        self.diverged = true;
    }

    /// One step; returns the sampled index, or `None` once the run diverged.
    pub fn step(&mut self) -> Option<usize> {
        if self.diverged {
            return None;
        }
        let i = self.rng.below(self.inst.n());
        let sample = self.inst.sample(i).expect("index drawn in range");
        let alpha = self.schedule.alpha(self.k);
        self.k += 1;
        match self.kind.step(&self.x, &sample, alpha, self.reg) {
            Ok(r) if all_finite(&r.x_next) => {
                self.x = r.x_next;
                if let Some(radius) = self.projection_radius {
                    let norm = self.x.norm();
                    if norm > radius {
                        self.x *= radius / norm;
                    }
                }
                Some(i)
            }
            _ => {
                self.diverged = true;
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{DesignSpec, NoiseSpec};

    #[test]
    fn seeded_runs_repeat() {
        let inst = PhaseRetrievalInstance::generate(30, 5, DesignSpec::well_conditioned(), NoiseSpec::Noiseless, 1)
            .unwrap();
        let sched = Schedule::new(10.0, 0.7).unwrap();
        let mut r1 = StochasticRun::seeded(&inst, ModelKind::ProxLinear, sched, 9).unwrap();
        let mut r2 = StochasticRun::seeded(&inst, ModelKind::ProxLinear, sched, 9).unwrap();
        for _ in 0..500 {
            assert_eq!(r1.step(), r2.step());
        }
        assert_eq!(r1.x(), r2.x());
        assert_eq!(r1.steps_taken(), 500);
    }

    #[test]
    fn projection_keeps_iterates_in_the_ball() {
        let inst = PhaseRetrievalInstance::generate(30, 5, DesignSpec::well_conditioned(), NoiseSpec::Noiseless, 2)
            .unwrap();
        let sched = Schedule::new(500.0, 0.5).unwrap();
        let mut run = StochasticRun::seeded(&inst, ModelKind::Subgradient, sched, 1)
            .unwrap()
            .with_projection(1.5)
            .unwrap();
        for _ in 0..200 {
            run.step();
            assert!(run.x().norm() <= 1.5 + 1e-12);
        }
        assert!(StochasticRun::seeded(&inst, ModelKind::ProxPoint, sched, 1)
            .unwrap()
            .with_projection(1.0)
            .is_err());
    }
}
