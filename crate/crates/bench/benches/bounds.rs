use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use p2l_core::{binomial_tail_inversion, eps_bar, eps_bar_oracle, BoundQuery};
use std::hint::black_box;

fn bounds(c: &mut Criterion) {
    let mut g = c.benchmark_group("eps_bar");
    for (k, n) in [(5, 500), (125, 500), (40, 2000)] {
        let q = BoundQuery::new(k, n, 1e-6).unwrap();
        g.bench_with_input(BenchmarkId::new("beta", format!("{k}/{n}")), &q, |b, q| {
            b.iter(|| eps_bar(black_box(q)))
        });
        g.bench_with_input(BenchmarkId::new("psi", format!("{k}/{n}")), &q, |b, q| {
            b.iter(|| eps_bar_oracle(black_box(q)).unwrap())
        });
    }
    g.finish();

    c.bench_function("bound_table_500", |b| {
        b.iter(|| {
            (0..=500)
                .map(|k| eps_bar(&BoundQuery::new(k, 500, 1e-4).unwrap()).eps)
                .sum::<f64>()
        })
    });
    c.bench_function("binomial_tail_inversion_1000", |b| {
        b.iter(|| binomial_tail_inversion(black_box(30), 1000, 1e-2).unwrap())
    });
}

criterion_group!(benches, bounds);
criterion_main!(benches);
