//! Default build (parallel when the `parallel` feature is on) vs. the
//! always-sequential twins of the hot numeric kernels.

use cbn_core::mixture::{
    em_temporary_stats, em_temporary_stats_seq, responsibilities, responsibilities_seq,
    MixtureState,
};
use cbn_core::numerics::{colwise_mean_var, colwise_mean_var_seq, matmul, matmul_seq, Matrix, Rng};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.normal()).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn random_state(m: usize, d: usize, rng: &mut Rng) -> MixtureState {
    let mut tau: Vec<f64> = (0..m).map(|_| rng.uniform_in(0.2, 1.0)).collect();
    let total: f64 = tau.iter().sum();
    for t in &mut tau {
        *t /= total;
    }
    MixtureState {
        tau,
        mu: (0..m).map(|_| (0..d).map(|_| rng.normal()).collect()).collect(),
        var: (0..m)
            .map(|_| (0..d).map(|_| rng.uniform_in(0.3, 2.0)).collect())
            .collect(),
        eps: 1e-5,
        lambda_c: 0.1,
        lambda_s: 0.1,
        starvation_events: 0,
    }
}

fn bench_matmul(c: &mut Criterion) {
    let mut rng = Rng::new(7);
    let mut group = c.benchmark_group("matmul");
    for n in [64usize, 256] {
        let a = random_matrix(&mut rng, n, n);
        let b = random_matrix(&mut rng, n, n);
        group.bench_with_input(BenchmarkId::new("default", n), &n, |bench, _| {
            bench.iter(|| matmul(black_box(&a), black_box(&b)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |bench, _| {
            bench.iter(|| matmul_seq(black_box(&a), black_box(&b)).unwrap())
        });
    }
    group.finish();
}

fn bench_mean_var(c: &mut Criterion) {
    let mut rng = Rng::new(8);
    let mut group = c.benchmark_group("colwise_mean_var");
    for n in [1024usize, 8192] {
        let x = random_matrix(&mut rng, 64, n);
        group.bench_with_input(BenchmarkId::new("default", n), &n, |bench, _| {
            bench.iter(|| colwise_mean_var(black_box(&x)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |bench, _| {
            bench.iter(|| colwise_mean_var_seq(black_box(&x)).unwrap())
        });
    }
    group.finish();
}

fn bench_responsibilities(c: &mut Criterion) {
    let mut rng = Rng::new(9);
    let mut group = c.benchmark_group("responsibilities");
    for m in [4usize, 16] {
        let state = random_state(m, 64, &mut rng);
        let x = random_matrix(&mut rng, 64, 4096);
        group.bench_with_input(BenchmarkId::new("default", m), &m, |bench, _| {
            bench.iter(|| responsibilities(black_box(&x), black_box(&state)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", m), &m, |bench, _| {
            bench.iter(|| responsibilities_seq(black_box(&x), black_box(&state)).unwrap())
        });
    }
    group.finish();
}

fn bench_em_stats(c: &mut Criterion) {
    let mut rng = Rng::new(10);
    let mut group = c.benchmark_group("em_temporary_stats");
    for m in [4usize, 16] {
        let state = random_state(m, 64, &mut rng);
        let x = random_matrix(&mut rng, 64, 4096);
        let w = responsibilities(&x, &state).unwrap();
        group.bench_with_input(BenchmarkId::new("default", m), &m, |bench, _| {
            bench.iter(|| em_temporary_stats(black_box(&x), black_box(&w)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", m), &m, |bench, _| {
            bench.iter(|| em_temporary_stats_seq(black_box(&x), black_box(&w)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_matmul,
    bench_mean_var,
    bench_responsibilities,
    bench_em_stats
);
criterion_main!(benches);
