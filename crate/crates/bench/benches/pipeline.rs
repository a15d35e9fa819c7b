use std::hint::black_box;

use bhc_bench::{coherent, single_channel};
use bhc_core::correlator::{f_direct, f_single};
use bhc_core::fock::{normal_moment, MomentOrder};
use bhc_core::network::build_transfer;
use bhc_core::pipeline::reconstruct_analytic;
use bhc_core::sampler::{sample_classical, sample_exact, ExperimentSpec};
use bhc_core::{DeviceSpec, StateSpec};
use criterion::{criterion_group, criterion_main, Criterion};

fn oracle(c: &mut Criterion) {
    let st = coherent(30);
    let order = MomentOrder::single(2, 2);
    c.bench_function("normal_moment cutoff 30 order (2,2)", |b| {
        b.iter(|| normal_moment(black_box(&st), &order).unwrap())
    });
}

fn network(c: &mut Criterion) {
    let dev = DeviceSpec::new(6, 2.0, 1.0).unwrap();
    c.bench_function("build_transfer d=6", |b| {
        b.iter(|| build_transfer(black_box(&dev)).unwrap())
    });
}

fn correlator(c: &mut Criterion) {
    let st = coherent(20);
    let sc = single_channel(3, 2.0);
    let dev = sc.channels[0].device.clone();
    c.bench_function("f_single k=4 d=3", |b| {
        b.iter(|| f_single(black_box(&st), &dev, 0.3, 4).unwrap())
    });
    c.bench_function("f_direct k=4 d=3", |b| {
        b.iter(|| f_direct(black_box(&st), &sc, &[0.3], &[4]).unwrap())
    });
}

fn reconstruction(c: &mut Criterion) {
    let st = coherent(20);
    let sc = single_channel(3, 2.0);
    c.bench_function("reconstruct_analytic k=4", |b| {
        b.iter(|| reconstruct_analytic(black_box(&st), &sc, &[4]).unwrap())
    });
}

fn sampling(c: &mut Criterion) {
    let st = coherent(10);
    let sc = single_channel(2, 2.0);
    let dev = sc.channels[0].device.clone();
    let spec = ExperimentSpec::new(10_000, 1);
    let mut g = c.benchmark_group("sampler");
    g.sample_size(10);
    g.bench_function("exact d=2 1e4 shots", |b| {
        b.iter(|| sample_exact(black_box(&st), &dev, &spec, &[0.0]).unwrap())
    });
    let p = StateSpec::thermal(1.0);
    g.bench_function("classical d=2 1e4 shots", |b| {
        b.iter(|| sample_classical(black_box(&p), &sc, &spec, &[vec![0.0]]).unwrap())
    });
    g.finish();
}

criterion_group!(benches, oracle, network, correlator, reconstruction, sampling);
criterion_main!(benches);
