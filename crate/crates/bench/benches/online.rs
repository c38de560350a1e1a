use std::hint::black_box;

use cre_rom_bench::{fixture, probe_points};
use cre_rom_core::sweep::shear_slice;
use cre_rom_core::Dimensions;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn online(c: &mut Criterion) {
    let build = fixture(32);
    let model = &build.model;
    let points = probe_points();

    let mut group = c.benchmark_group("evaluate");
    for n in [3, 7, 12] {
        let dims = Dimensions::coupled(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &dims, |b, dims| {
            b.iter(|| {
                for mu in &points {
                    black_box(model.evaluate(black_box(mu), *dims).unwrap());
                }
            })
        });
    }
    group.finish();

    let dims = model.default_dimensions();
    c.bench_function("homogenize", |b| {
        b.iter(|| black_box(model.homogenize(black_box(3.0), dims).unwrap()))
    });
    let slice = shear_slice(50).unwrap();
    c.bench_function("sweep_50", |b| {
        b.iter(|| {
            for mu in &slice {
                black_box(model.evaluate(mu, dims).unwrap());
            }
        })
    });
}

fn truth(c: &mut Criterion) {
    let mut group = c.benchmark_group("truth_solve");
    group.sample_size(10);
    for n in [32, 64] {
        let build = fixture(n);
        let mu = probe_points()[0];
        group.bench_with_input(BenchmarkId::from_parameter(n), &mu, |b, mu| {
            b.iter(|| black_box(build.truth.solve(mu).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, online, truth);
criterion_main!(benches);
