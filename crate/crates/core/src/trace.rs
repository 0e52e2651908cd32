//! Per-run checkpoint records.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    /// Iterations divided by `n` for stochastic runs; the outer iteration
    /// for the deterministic baseline.
    pub pass: f64,
    pub objective: f64,
    /// Norm of the (averaged) gradient mapping at the checkpoint.
    pub grad_map_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub method: String,
    pub alpha0: f64,
    pub beta: f64,
    pub seed: u64,
    pub checkpoints: Vec<Checkpoint>,
    /// The run produced a non-finite iterate and was cut short.
    pub diverged: bool,
    /// Baseline subproblems that hit the ADMM iteration cap.
    pub unconverged_subproblems: usize,
}

impl RunTrace {
    pub fn new(method: impl Into<String>, alpha0: f64, beta: f64, seed: u64) -> Self {
        RunTrace {
            method: method.into(),
            alpha0,
            beta,
            seed,
            checkpoints: Vec::new(),
            diverged: false,
            unconverged_subproblems: 0,
        }
    }

    pub fn push(&mut self, pass: f64, objective: f64, grad_map_norm: f64) {
        debug_assert!(self.checkpoints.last().is_none_or(|c| c.pass < pass));
        self.checkpoints.push(Checkpoint {
            pass,
            objective,
            grad_map_norm,
        });
    }

    pub fn objectives(&self) -> impl Iterator<Item = f64> + '_ {
        self.checkpoints.iter().map(|c| c.objective)
    }

    /// Smallest finite recorded objective.
    pub fn best_objective(&self) -> Option<f64> {
        self.objectives().filter(|v| v.is_finite()).reduce(f64::min)
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.checkpoints.last().map(|c| c.objective)
    }

    pub fn objective_at_pass(&self, pass: f64) -> Option<f64> {
        self.checkpoints.iter().find(|c| c.pass == pass).map(|c| c.objective)
    }

    /// First iterate index (1-based) with objective `<= eps`, when every
    /// iterate was recorded.
    pub fn first_hit(&self, eps: f64) -> Option<usize> {
        self.objectives().position(|v| v <= eps).map(|k| k + 1)
    }
}
