use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use concreg_bench::noisy_parabola;
use concreg_core::covering::{greedy_packings, PackingDomain, MAX_PACKING};
use concreg_core::{max_linear_over_ball, project, project_via_rows, ConeSpec, DEFAULT_TOL};

fn projection(c: &mut Criterion) {
    let mut group = c.benchmark_group("project_concave");
    for n in [64usize, 512, 4096] {
        let y = noisy_parabola(n, 1.0, 1);
        group.bench_with_input(BenchmarkId::new("knots", n), &y, |b, y| {
            b.iter(|| project(black_box(y), &ConeSpec::FullConcave, DEFAULT_TOL).unwrap())
        });
    }
    for n in [64usize, 512] {
        let y = noisy_parabola(n, 1.0, 1);
        group.bench_with_input(BenchmarkId::new("rows", n), &y, |b, y| {
            b.iter(|| project_via_rows(black_box(y), &ConeSpec::FullConcave, DEFAULT_TOL).unwrap())
        });
    }
    group.finish();
}

fn ball_supremum(c: &mut Criterion) {
    let mut group = c.benchmark_group("ball_supremum");
    for n in [64usize, 512] {
        let z = noisy_parabola(n, 1.0, 2);
        let center = vec![0.0; n];
        group.bench_with_input(BenchmarkId::new("zero_center", n), &z, |b, z| {
            b.iter(|| {
                max_linear_over_ball(black_box(z), &center, 2.0, &ConeSpec::FullConcave, DEFAULT_TOL).unwrap()
            })
        });
    }
    group.finish();
}

fn packing(c: &mut Criterion) {
    let mut group = c.benchmark_group("greedy_packing");
    group.sample_size(10);
    for n in [6usize, 12] {
        let eps = 0.1 * (n as f64).sqrt();
        group.bench_with_input(BenchmarkId::new("concave", n), &eps, |b, &eps| {
            b.iter(|| {
                greedy_packings(
                    n,
                    &PackingDomain::Concave { bound: 1.0 },
                    &[eps],
                    50,
                    MAX_PACKING,
                    3,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, projection, ball_supremum, packing);
criterion_main!(benches);
