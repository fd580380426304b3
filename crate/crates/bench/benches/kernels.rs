use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use wcchaos_bench::{pairwise_drift, random_state};
use wcchaos_core::noise::NoiseStream;
use wcchaos_core::{
    drift, em_step, reference_two_population, s_moment, GaussianParams, MeanField, QuadratureRule, SigmoidSpec,
};

fn coupling(c: &mut Criterion) {
    let params = reference_two_population();
    let mut group = c.benchmark_group("drift");
    for n in [10usize, 100, 1000] {
        let state = random_state(&params, n, 1);
        group.throughput(Throughput::Elements(state.values.len() as u64));
        group.bench_with_input(BenchmarkId::new("sufficient_stats", n), &state, |b, s| {
            b.iter(|| drift(&params, black_box(s)).unwrap())
        });
        if n <= 100 {
            group.bench_with_input(BenchmarkId::new("pairwise", n), &state, |b, s| {
                b.iter(|| pairwise_drift(&params, black_box(s)))
            });
        }
    }
    group.finish();
}

fn step(c: &mut Criterion) {
    let params = reference_two_population();
    let mut group = c.benchmark_group("em_step");
    for n in [100usize, 10_000] {
        let state = random_state(&params, n, 2);
        let layout = params.layout(n);
        let mut streams: Vec<NoiseStream> = (0..layout.len())
            .map(|k| NoiseStream::for_neuron(3, layout.unflatten(k).unwrap()))
            .collect();
        group.throughput(Throughput::Elements(state.values.len() as u64));
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| em_step(&params, black_box(&state), 1e-3, &mut streams).unwrap())
        });
    }
    group.finish();
}

fn moments(c: &mut Criterion) {
    let spec = SigmoidSpec::Logistic;
    let mut group = c.benchmark_group("s_moment");
    for order in [32usize, 64, 128] {
        let rule = QuadratureRule::new(order).unwrap();
        let g = GaussianParams::new(0.3, 0.5).unwrap();
        group.bench_function(BenchmarkId::from_parameter(order), |b| {
            b.iter(|| s_moment(black_box(g), &spec, &rule).unwrap())
        });
    }
    group.finish();
}

fn solve(c: &mut Criterion) {
    let mf = MeanField::new(reference_two_population(), QuadratureRule::default());
    c.bench_function("meanfield_solve_T100_dt0.01", |b| b.iter(|| mf.solve(black_box(100.0), 0.01).unwrap()));
}

criterion_group!(benches, coupling, step, moments, solve);
criterion_main!(benches);
