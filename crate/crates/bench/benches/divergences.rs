use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use sdkl_bench::{default_quad, gaussian_truth, sd_rule};
use sdkl_core::divergence::{ckl, delta_ekl, kl_quadrature, localized_deltas};
use sdkl_core::Ball;

fn single_integrals(c: &mut Criterion) {
    let q = default_quad();
    let p = gaussian_truth(1.5);
    let f = gaussian_truth(0.0);
    let ball = Ball::new(1.0, 0.05).unwrap();
    c.bench_function("kl_quadrature", |b| {
        b.iter(|| kl_quadrature(black_box(&p), &f, &q).unwrap())
    });
    c.bench_function("ckl", |b| {
        b.iter(|| ckl(black_box(&p), &f, &ball, &q).unwrap())
    });
}

fn localized(c: &mut Criterion) {
    let q = default_quad();
    let p = gaussian_truth(1.5);
    let rule = sd_rule(1e-3);
    c.bench_function("localized_deltas_small_ball", |b| {
        b.iter(|| localized_deltas(&rule, 1.0, black_box(0.0), &p, 1e-6, &q).unwrap())
    });
}

fn nested(c: &mut Criterion) {
    let q = default_quad();
    let p = gaussian_truth(1.0);
    let rule = sd_rule(0.5);
    let mut g = c.benchmark_group("nested");
    g.sample_size(10);
    g.bench_function("delta_ekl", |b| {
        b.iter(|| delta_ekl(&p, &rule, black_box(0.0), &q).unwrap())
    });
    g.finish();
}

criterion_group!(benches, single_integrals, localized, nested);
criterion_main!(benches);
