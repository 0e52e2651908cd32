use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use modelprox::harness::{execute, ExperimentSpec, ScheduleChoice};
use modelprox::schedules::tune_schedule;
use modelprox::{DesignSpec, Execution, ModelKind, NoiseSpec, PhaseRetrievalInstance, Schedule, TuningGrid};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn replications(c: &mut Criterion) {
    let mut spec = ExperimentSpec::comparison(100, 10);
    spec.replications = 8;
    spec.budget_passes = 10;
    spec.baseline_iters = Some(10);
    spec.schedule = ScheduleChoice::Fixed(Schedule::new(10.0, 0.7).unwrap());
    let mut group = c.benchmark_group("comparison_replications");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| execute(black_box(&spec), exec).unwrap())
        });
    }
    group.finish();
}

fn stepsize_grid(c: &mut Criterion) {
    let mut spec = ExperimentSpec::stepsize_grid(100, 10);
    spec.replications = 2;
    spec.budget_passes = 5;
    spec.alpha0_grid = vec![0.5, 8.0, 128.0];
    spec.beta_grid = vec![0.5, 0.75, 1.0];
    let mut group = c.benchmark_group("stepsize_grid_cells");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| execute(black_box(&spec), exec).unwrap())
        });
    }
    group.finish();
}

fn pilots(c: &mut Criterion) {
    let inst = PhaseRetrievalInstance::generate(200, 20, DesignSpec::well_conditioned(), NoiseSpec::Noiseless, 3).unwrap();
    let grid = TuningGrid::default();
    let mut group = c.benchmark_group("tuning_pilots");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| tune_schedule(&inst, ModelKind::ProxLinear, &grid, 5, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, replications, stepsize_grid, pilots);
criterion_main!(benches);
