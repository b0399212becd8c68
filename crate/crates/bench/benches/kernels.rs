use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use onestep::eigen::eigenvalues;
use onestep::kinetics::{diffusion, drift, jacobian};
use onestep::simulate::{integrate_ode, integrate_sde, ssa_run, RunConfig};
use onestep_bench::{chunks, fasttrack_default, flat_state};

fn kinetics(c: &mut Criterion) {
    let mut g = c.benchmark_group("kinetics");
    for m in [2, 8, 32] {
        let s = chunks(m);
        let x = flat_state(&s, 7.0);
        g.bench_with_input(BenchmarkId::new("drift", m), &x, |b, x| b.iter(|| drift(&s, black_box(x))));
        g.bench_with_input(BenchmarkId::new("diffusion", m), &x, |b, x| b.iter(|| diffusion(&s, black_box(x))));
        g.bench_with_input(BenchmarkId::new("jacobian", m), &x, |b, x| b.iter(|| jacobian(&s, black_box(x))));
    }
    g.finish();
}

fn integrators(c: &mut Criterion) {
    let s = fasttrack_default();
    let cfg = RunConfig { record_every: 100, ..RunConfig::new(100.0, 0.01) };
    c.bench_function("rk4 fasttrack 10k steps", |b| b.iter(|| integrate_ode(&s, black_box(&[10.0, 1.0]), &cfg)));
    c.bench_function("euler-maruyama fasttrack 10k steps", |b| {
        b.iter(|| integrate_sde(&s, black_box(&[10.0, 1.0]), &cfg))
    });
    let ssa_cfg = RunConfig { record_every: 1000, ..RunConfig::new(10.0, 0.1) };
    let scaled = onestep::models::fasttrack(&onestep::FastTrackParams::new(100.0, 0.001, 0.5)).unwrap();
    c.bench_function("gillespie fasttrack x100 to t=10", |b| {
        b.iter(|| ssa_run(&scaled, black_box(&[1000, 100]), &ssa_cfg))
    });
}

fn spectra(c: &mut Criterion) {
    let mut g = c.benchmark_group("eigenvalues");
    for n in [2, 8, 32] {
        // deterministic, nonsymmetric, full
        let a = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 13) % 11) as f64 - 5.0 + if i == j { 3.0 } else { 0.0 });
        g.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| b.iter(|| eigenvalues(black_box(a))));
    }
    g.finish();
}

criterion_group!(benches, kinetics, integrators, spectra);
criterion_main!(benches);
