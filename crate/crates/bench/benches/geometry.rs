use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rapd_bench::{random_cloud, random_points};
use rapd_core::degradation::{degrade, DegradationConfig, DegradeMethod};
use rapd_core::geometry::{chamfer_distance, chamfer_value_and_grad, emd_distance, nearest_neighbors, MetricConfig};

fn chamfer(c: &mut Criterion) {
    let cfg = MetricConfig::default();
    let mut g = c.benchmark_group("chamfer");
    for n in [256, 1024, 2048] {
        let (a, b) = (random_points(n, 1), random_points(n, 2));
        g.bench_with_input(BenchmarkId::new("value", n), &n, |bench, _| {
            bench.iter(|| chamfer_distance(&a, &b, &cfg).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("value_and_grad", n), &n, |bench, _| {
            bench.iter(|| chamfer_value_and_grad(&a, &b, 1.0).unwrap())
        });
    }
    g.finish();
}

fn knn(c: &mut Criterion) {
    let mut g = c.benchmark_group("knn");
    for n in [512, 2048] {
        let (q, r) = (random_points(n / 4, 3), random_points(n, 4));
        g.bench_with_input(BenchmarkId::new("k4", n), &n, |bench, _| {
            bench.iter(|| nearest_neighbors(&q, &r, 4).unwrap())
        });
    }
    g.finish();
}

fn emd(c: &mut Criterion) {
    let mut g = c.benchmark_group("emd");
    g.sample_size(10);
    for n in [64, 256] {
        let (a, b) = (random_points(n, 5), random_points(n, 6));
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| bench.iter(|| emd_distance(&a, &b).unwrap()));
    }
    g.finish();
}

fn degradation(c: &mut Criterion) {
    let predicted = random_cloud(2048, 7);
    let partial = random_cloud(512, 8);
    let mut g = c.benchmark_group("degrade");
    for method in DegradeMethod::ALL {
        let cfg = DegradationConfig { method, ..Default::default() };
        g.bench_function(method.as_str(), |bench| bench.iter(|| degrade(&predicted, &partial, &cfg).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, chamfer, knn, emd, degradation);
criterion_main!(benches);
