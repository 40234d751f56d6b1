use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use ldp_core::coefficients::{CoefficientModel, SlowlyVarying};
use ldp_core::limits::prelimit_sum;
use ldp_core::linalg::SymPsd;
use ldp_core::montecarlo::estimate_tail;
use ldp_core::rates::{gaussian_rate_alpha, lambda_rl, GaussianMode, GridFunction, PartitionLevels, QuadratureSpec};
use ldp_core::{NoiseModel, Scenario, ScenarioTag, SimConfig, TailMethod, WindowSumTable};

fn long(radius: i64) -> CoefficientModel {
    CoefficientModel::long_memory(0.75, 0.7, SlowlyVarying::None, radius).unwrap()
}

fn window_sums(c: &mut Criterion) {
    let table = WindowSumTable::new(&long(1 << 20));
    c.bench_function("window_sum_clamped/4096", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for j in -2048..2048 {
                acc += table.window_sum_clamped(black_box(j), 1024);
            }
            acc
        })
    });
}

fn prelimit(c: &mut Criterion) {
    let mut g = c.benchmark_group("prelimit_sum");
    g.sample_size(10);
    let pl = PartitionLevels::new(vec![0.5, 1.0], vec![vec![0.8], vec![-0.3]]).unwrap();
    for k in [14u32, 17] {
        let a_n = 1i64 << k;
        let n = 1u64 << 10;
        let coeffs = long(a_n + n as i64);
        let table = WindowSumTable::new(&coeffs);
        let s = Scenario::standard(ScenarioTag::R1, NoiseModel::rademacher(), coeffs).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(a_n), &a_n, |b, &a| {
            b.iter(|| prelimit_sum(&s, &table, &pl, n, a).unwrap().value)
        });
    }
    g.finish();
}

fn kernel_functional(c: &mut Criterion) {
    let noise = NoiseModel::rademacher();
    let pl = PartitionLevels::new(vec![0.4, 1.0], vec![vec![1.0], vec![0.5]]).unwrap();
    let spec = QuadratureSpec::default();
    let mut g = c.benchmark_group("lambda_rl");
    g.sample_size(20);
    g.bench_function("rademacher/k=2", |b| {
        b.iter(|| lambda_rl(&noise, 0.75, 0.7, black_box(&pl), &spec).unwrap().value)
    });
    g.finish();
}

fn gaussian_rate(c: &mut Criterion) {
    let sigma = SymPsd::from_rows(&[vec![1.0]]).unwrap();
    let mut g = c.benchmark_group("gaussian_rate_alpha");
    g.sample_size(20);
    for m in [64usize, 256] {
        let phi = GridFunction::new((0..m).map(|j| vec![(j as f64 / m as f64).sin()]).collect()).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(m), &phi, |b, phi| {
            b.iter(|| gaussian_rate_alpha(&sigma, 0.75, 0.6, phi, GaussianMode::Variational).unwrap().value)
        });
    }
    g.finish();
}

fn tilted_tail(c: &mut Criterion) {
    let s = Scenario::standard(ScenarioTag::R1, NoiseModel::uniform(1.0), long(128)).unwrap();
    let cfg = SimConfig::new(s, 64, 128, 2000, 1).unwrap();
    let mut g = c.benchmark_group("estimate_tail");
    g.sample_size(10);
    g.bench_function("tilted/R=2000", |b| {
        b.iter(|| estimate_tail(&cfg, black_box(0.5), TailMethod::Tilted).unwrap().estimate)
    });
    g.finish();
}

criterion_group!(benches, window_sums, prelimit, kernel_functional, gaussian_rate, tilted_tail);
criterion_main!(benches);
