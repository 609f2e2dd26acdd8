use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use mcte::mdn::{entropy_gradient, tsallis_entropy_analytic};
use mcte::solver::{feature_expectation, solve_mcte, SolveOptions};
use mcte::sparsemax::{sparsemax, LogitVector};
use mcte::tabular::{
    gridworld, occupancy_from_policy, random_mdp, sparse_value_iteration, GridworldSpec, ValueIterationOptions,
};
use mcte_bench::{logits, mixture_policy, policy_table, rng, states};

fn bench_sparsemax(c: &mut Criterion) {
    let mut group = c.benchmark_group("sparsemax");
    for n in [4, 16, 128] {
        let z = LogitVector::new(logits(&mut rng(n as u64), n)).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &z, |b, z| b.iter(|| sparsemax(black_box(z))));
    }
    group.finish();
}

fn bench_value_iteration(c: &mut Criterion) {
    let grid = gridworld(&GridworldSpec::default());
    c.bench_function("sparse_vi/gridworld_5x5", |b| {
        b.iter(|| sparse_value_iteration(black_box(&grid), 1.0, ValueIterationOptions::default()).unwrap())
    });
    let dense = random_mdp(50, 5, 4, 0.9, 3);
    c.bench_function("sparse_vi/random_50x5", |b| {
        b.iter(|| sparse_value_iteration(black_box(&dense), 0.5, ValueIterationOptions::default()).unwrap())
    });
}

fn bench_occupancy(c: &mut Criterion) {
    let mut group = c.benchmark_group("occupancy");
    for ns in [10, 100] {
        let mdp = random_mdp(ns, 5, 2, 0.95, ns as u64);
        let pi = policy_table(&mut rng(ns as u64), ns, 5);
        group.bench_with_input(BenchmarkId::from_parameter(ns), &(mdp, pi), |b, (mdp, pi)| {
            b.iter(|| occupancy_from_policy(black_box(mdp), black_box(pi)).unwrap())
        });
    }
    group.finish();
}

fn bench_mcte(c: &mut Criterion) {
    let mdp = gridworld(&GridworldSpec {
        size: 3,
        ..GridworldSpec::default()
    });
    let expert = policy_table(&mut rng(7), mdp.n_states(), mdp.n_actions());
    let mu = feature_expectation(&mdp, &expert).unwrap();
    let opts = SolveOptions {
        iters: 50,
        grad_tol: 0.0,
        ..SolveOptions::default()
    };
    c.bench_function("solve_mcte/3x3_50_steps", |b| b.iter(|| solve_mcte(&mdp, black_box(&mu), &opts).unwrap()));
}

fn bench_mixture_entropy(c: &mut Criterion) {
    let mut group = c.benchmark_group("mixture_entropy");
    let batch = states(&mut rng(1), 256);
    for k in [2, 4, 8] {
        let policy = mixture_policy(k as u64, k);
        group.bench_with_input(BenchmarkId::new("value", k), &policy, |b, p| {
            b.iter(|| tsallis_entropy_analytic(p, black_box(&batch)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("gradient", k), &policy, |b, p| {
            b.iter(|| entropy_gradient(p, black_box(&batch)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    kernels,
    bench_sparsemax,
    bench_value_iteration,
    bench_occupancy,
    bench_mcte,
    bench_mixture_entropy
);
criterion_main!(kernels);
