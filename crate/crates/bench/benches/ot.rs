use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use wassffed_bench::{histogram, rng};
use wassffed_core::ot::{barycenter, sinkhorn_solve, wasserstein_1d, SinkhornParams};

fn sinkhorn(c: &mut Criterion) {
    let mut group = c.benchmark_group("sinkhorn");
    for bins in [20, 100, 400] {
        let mut r = rng(bins as u64);
        let (a, b) = (histogram(&mut r, bins), histogram(&mut r, bins));
        let params = SinkhornParams {
            epsilon: 1.0 / bins as f64,
            max_iters: 5000,
            tol: 1e-6,
        };
        group.bench_with_input(BenchmarkId::from_parameter(bins), &(a, b), |bench, (a, b)| {
            bench.iter(|| sinkhorn_solve(black_box(a), black_box(b), &params).unwrap())
        });
    }
    group.finish();
}

fn barycenters(c: &mut Criterion) {
    let mut group = c.benchmark_group("barycenter");
    for groups in [2, 4] {
        let mut r = rng(7 + groups as u64);
        let hists: Vec<_> = (0..groups).map(|_| histogram(&mut r, 100)).collect();
        let weights = vec![1.0 / groups as f64; groups];
        group.bench_with_input(BenchmarkId::from_parameter(groups), &hists, |bench, hists| {
            bench.iter(|| barycenter(black_box(hists), &weights, 0.01, 1000, 1e-6).unwrap())
        });
    }
    group.finish();
}

fn w1(c: &mut Criterion) {
    let mut r = rng(3);
    let (a, b) = (histogram(&mut r, 100), histogram(&mut r, 100));
    c.bench_function("wasserstein_1d/100", |bench| {
        bench.iter(|| wasserstein_1d(black_box(&a), black_box(&b)).unwrap())
    });
}

criterion_group!(benches, sinkhorn, barycenters, w1);
criterion_main!(benches);
