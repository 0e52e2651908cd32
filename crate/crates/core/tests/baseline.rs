mod common;

use common::*;
use modelprox::baseline::{prox_linear_outer, solve_subproblem, AdmmConfig, QpSubproblem};
use modelprox::harness::{execute, ExperimentSpec};
use modelprox::models::step_proxlinear;
use modelprox::solver::initial_point;
use modelprox::{DesignSpec, Execution, Matrix, NoiseSpec, PhaseRetrievalInstance, Regularizer, Rng, Vector};

#[test]
fn single_row_matches_closed_form() {
    let mut rng = Rng::new(11);
    for _ in 0..30 {
        let d = 1 + rng.below(4);
        let a = random_vector(&mut rng, d, 1.0);
        let b = 2.0 * rng.gaussian();
        let inst = PhaseRetrievalInstance::from_parts(Matrix::from_rows(&[a.iter().copied().collect()]), vec![b], Vector::zeros(d))
            .unwrap();
        let x = random_vector(&mut rng, d, 1.0);
        let alpha = 10f64.powf(2.0 * rng.uniform() - 1.0);
        let sol = solve_subproblem(&QpSubproblem::at(&inst, &x, alpha).unwrap(), &AdmmConfig::default()).unwrap();
        let closed = step_proxlinear(&x, &inst.sample(0).unwrap(), alpha, Regularizer::None).unwrap().x_next - &x;
        assert!((&sol.z - &closed).norm() <= 1e-6, "{} vs {}", sol.z, closed);
    }
}

#[test]
fn two_dimensional_subproblems_match_grid() {
    let mut rng = Rng::new(12);
    for _ in 0..5 {
        let sub = small_qp(&mut rng, 3);
        let sol = solve_subproblem(&sub, &AdmmConfig::default()).unwrap();
        assert!(sol.converged);
        assert!((sub.objective(&sol.z) - qp_oracle(&sub)).abs() <= 1e-6);
    }
}

#[test]
fn small_alpha_descent() {
    for seed in 0..3 {
        let inst = PhaseRetrievalInstance::generate(60, 6, DesignSpec::well_conditioned(), NoiseSpec::Laplace { scale: 0.5 }, seed)
            .unwrap();
        let alpha = 1.0 / inst.max_weak_convexity_constant();
        let t = prox_linear_outer(&inst, &initial_point(6, seed).unwrap(), alpha, 50, &AdmmConfig::default()).unwrap();
        let f: Vec<f64> = t.objectives().collect();
        assert_eq!(f.len(), 51);
        assert!(f.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }
}

#[test]
fn planted_signal_is_a_fixed_point() {
    let inst = PhaseRetrievalInstance::generate(40, 5, DesignSpec::well_conditioned(), NoiseSpec::Noiseless, 3).unwrap();
    let t = prox_linear_outer(&inst, inst.x_star(), 1.0, 10, &AdmmConfig::default()).unwrap();
    assert!(t.objectives().all(|f| f <= 1e-10));
}

/// With the default outer stepsize of 1 the baseline moves slowly on the
/// 1/n-scaled objective, and its accuracy is floored by the ADMM tolerance,
/// so it does not end below the stochastic prox-linear method.
#[test]
#[ignore = "fails with the default baseline stepsize and ADMM tolerance; see README"]
fn deterministic_beats_stochastic_after_200_iterations() {
    let mut spec = ExperimentSpec::comparison(100, 20);
    spec.replications = 10;
    let res = execute(&spec, Execution::Parallel).unwrap();
    let wins = res
        .replications
        .iter()
        .filter(|r| {
            let det = r.traces[0].final_objective().unwrap();
            r.traces[1..].iter().all(|t| det < t.final_objective().unwrap_or(f64::INFINITY))
        })
        .count();
    assert!(wins * 2 > spec.replications, "{wins}/{}", spec.replications);
}
