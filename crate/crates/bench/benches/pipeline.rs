use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use tqem_core::channels::{analytic_plan, relaxation_channel, NoiseChannelSpec, RateFunctions};
use tqem_core::mitigation::{build_plan, invert_channel, optimize_mitigation_map, ObservableAxis};
use tqem_core::sensing::{sweep, MitigationStrategy, NoiseSource, SensingSpec};
use tqem_core::spinbath::{gcce_average, BathParams};

fn plans(c: &mut Criterion) {
    let noise = relaxation_channel(0.7, 0.3).unwrap();
    c.bench_function("invert_and_build_plan", |b| {
        b.iter(|| build_plan(&invert_channel(black_box(&noise)).unwrap()).unwrap())
    });
    c.bench_function("optimize_mitigation_map", |b| {
        b.iter(|| optimize_mitigation_map(black_box(&noise), ObservableAxis::Z).unwrap())
    });
    let spec = NoiseChannelSpec::Relaxation(RateFunctions::constant(0.05, 0.0));
    c.bench_function("analytic_plan", |b| b.iter(|| analytic_plan(black_box(&spec), 14.0).unwrap()));
}

fn sweeps(c: &mut Criterion) {
    let grid: Vec<f64> = (1..=50).map(|i| i as f64).collect();
    let spec = SensingSpec::dc(50.0, grid);
    let source = NoiseSource::Channel(NoiseChannelSpec::Dephasing(RateFunctions::constant(0.05, 0.0)));
    c.bench_function("dc_sweep_50_points", |b| {
        b.iter(|| sweep(&spec, &source, MitigationStrategy::Inverse, 10_000, 1).unwrap())
    });
}

fn bath(c: &mut Criterion) {
    let params = BathParams {
        density_per_nm2: 0.01,
        r_cut_nm: 15.0,
        nv_depth_nm: 10.0,
        n_configurations: 32,
        gcce_order: 2,
        fixed_spin_xyz_nm: None,
        seed: 3,
    };
    let configs = params.sample().unwrap();
    let times: Vec<f64> = (0..40).map(|i| i as f64 * 0.5).collect();
    let mut group = c.benchmark_group("spin_bath");
    group.sample_size(10);
    group.bench_function("gcce2_32_configs", |b| {
        b.iter(|| gcce_average(black_box(&configs), 2, &times, 5, true).unwrap())
    });
    group.finish();
}

criterion_group!(benches, plans, sweeps, bath);
criterion_main!(benches);
