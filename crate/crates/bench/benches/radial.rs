use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use radial_bench::{cubic1, cubic3};
use radial_core::critical::{bisect_boundary, classify_r0, xi_star};
use radial_core::foe::foe_closed;
use radial_core::soe::{soe_integrate, SoeLimits, SoeStart};
use radial_core::{build_radial, verify_residual, SolveConfig};

fn foe(c: &mut Criterion) {
    let nl = cubic3();
    c.bench_function("foe_closed", |b| b.iter(|| foe_closed(&nl, 2, 0.0, black_box(1.5), black_box(2.0)).unwrap()));
}

fn soe(c: &mut Criterion) {
    let nl = cubic1();
    let limits = SoeLimits { truncation: 50.0, ..SoeLimits::default() };
    c.bench_function("soe_origin_to_50", |b| {
        b.iter(|| soe_integrate(&nl, 2, SoeStart { r0: 0.0, xi: black_box(0.5), theta: 0.0 }, &[], &limits).unwrap())
    });
}

fn build(c: &mut Criterion) {
    let nl = cubic1();
    let cfg = SolveConfig::default();
    c.bench_function("build_sign_changing_k1", |b| b.iter(|| build_radial(&nl, 1, black_box(0.9), &cfg).unwrap()));
    c.bench_function("build_localized_k2", |b| b.iter(|| build_radial(&nl, 2, black_box(0.5), &cfg).unwrap()));
    let sol = build_radial(&nl, 2, 0.5, &cfg).unwrap();
    c.bench_function("verify_residual", |b| b.iter(|| verify_residual(black_box(&sol), &nl, 1e-7)));
}

fn thresholds(c: &mut Criterion) {
    let nl = cubic3();
    let cfg = SolveConfig::default();
    c.bench_function("xi_star_k2", |b| b.iter(|| xi_star(&nl, black_box(2)).unwrap()));
    c.bench_function("classify_r0", |b| b.iter(|| classify_r0(&nl, 2, black_box(4.0), &cfg).unwrap()));
    c.bench_function("bisect_boundary_1e-2", |b| b.iter(|| bisect_boundary(&nl, 2, black_box(1e-2), &cfg).unwrap()));
}

criterion_group!(benches, foe, soe, build, thresholds);
criterion_main!(benches);
