use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use piezolab_bench::default_operator;
use piezolab_core::analysis::{resolvent_norm, spectrum};
use piezolab_core::dynamics::{smooth_modal_data, CayleyStepper};
use piezolab_core::{build_matrices, DampingProfile, Grid1D};
use std::hint::black_box;

fn assembly(c: &mut Criterion) {
    let mut g = c.benchmark_group("assembly");
    for n in [128, 1024] {
        let grid = Grid1D::new(n).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &grid, |b, &grid| {
            b.iter(|| build_matrices(black_box(grid), &DampingProfile::default()))
        });
    }
    g.finish();
}

fn time_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("cayley_step");
    for n in [128, 1024] {
        let op = default_operator(n, 8);
        let stepper = CayleyStepper::new(&op, 1e-3).unwrap();
        let mut u = smooth_modal_data(std::slice::from_ref(&op), 2.0).unwrap().modes.remove(0);
        g.bench_function(BenchmarkId::from_parameter(n), |b| b.iter(|| stepper.advance(black_box(&mut u))));
    }
    g.finish();
}

fn resolvent(c: &mut Criterion) {
    let mut g = c.benchmark_group("resolvent_norm");
    for (n, j, lambda) in [(64, 10, 100.0), (128, 40, 300.0)] {
        let op = default_operator(n, j);
        g.bench_function(format!("n{n}_j{j}_lambda{lambda}"), |b| {
            b.iter(|| resolvent_norm(black_box(&op), lambda).unwrap())
        });
    }
    g.finish();
}

fn dense_spectrum(c: &mut Criterion) {
    let mut g = c.benchmark_group("spectrum");
    g.sample_size(10);
    for n in [32, 64] {
        let op = default_operator(n, 4);
        g.bench_function(BenchmarkId::from_parameter(n), |b| b.iter(|| spectrum(black_box(&op)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, assembly, time_step, resolvent, dense_spectrum);
criterion_main!(benches);
