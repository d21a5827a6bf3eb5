use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mrdist_bench::{kernel, subjects};
use mrdist_core::projection::project_at;
use mrdist_core::scaling_engine::{CascadeOptions, FilterBank, ScalingFunction};

fn cascade(c: &mut Criterion) {
    let mut group = c.benchmark_group("cascade_build");
    for name in ["d4", "d8"] {
        let filter = FilterBank::builtin(name).unwrap();
        for depth in [8u32, 10] {
            group.bench_with_input(BenchmarkId::new(name, depth), &depth, |b, &d| {
                b.iter(|| ScalingFunction::cascade_build(&filter, CascadeOptions::with_depth(d)).unwrap())
            });
        }
    }
    group.finish();
}

fn q0(c: &mut Criterion) {
    let k = kernel("d6");
    let pts: Vec<(f64, f64)> = (0..256)
        .map(|i| (i as f64 * 0.013, 1.5 - i as f64 * 0.007))
        .collect();
    c.bench_function("q0_d6_256", |b| {
        b.iter(|| {
            pts.iter()
                .map(|&(x, y)| k.q0_1d(black_box(x), black_box(y)))
                .sum::<f64>()
        })
    });
}

fn projection(c: &mut Criterion) {
    let k = kernel("d6");
    let mut group = c.benchmark_group("project_at");
    group.sample_size(20);
    for f in subjects() {
        group.bench_function(f.name().to_string(), |b| {
            b.iter(|| project_at(&k, &f, black_box(10.0), 0.0, black_box(0.37)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, cascade, q0, projection);
criterion_main!(benches);
