use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use orthodual::fields::{exact_stationary_covariance_with, TestFunction};
use orthodual::kernels::KernelSpec;
use orthodual::orthopoly::PolyParams;
use orthodual::sampler::covariance_grid_mc;
use orthodual::{CoordVector, DualConfig, Execution, Window};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn replicas(c: &mut Criterion) {
    let spec = KernelSpec::nearest_neighbor(1);
    let params = PolyParams::homogeneous(1.0).unwrap();
    let window = Window::new(1, 32).unwrap();
    let xis = [
        DualConfig::from_1d(&[(0, 1)]),
        DualConfig::from_1d(&[(0, 2)]),
    ];
    let mut group = c.benchmark_group("covariance_grid_mc");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, 20_000), |b| {
            b.iter(|| {
                covariance_grid_mc(
                    black_box(&xis),
                    &params,
                    1.0,
                    &spec,
                    window,
                    20_000,
                    7,
                    exec,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn exact(c: &mut Criterion) {
    let spec = KernelSpec::nearest_neighbor(2);
    let params = PolyParams::homogeneous(1.0).unwrap();
    let phi = TestFunction::unit_bump(2);
    let x = CoordVector::new(2, vec![orthodual::Site::origin(2); 2]).unwrap();
    let n = 32;
    let mut group = c.benchmark_group("exact_stationary_covariance");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, n), |b| {
            b.iter(|| {
                exact_stationary_covariance_with(
                    black_box(&x),
                    &phi,
                    n,
                    0.5 * (n * n) as f64,
                    &spec,
                    &params,
                    exec,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, replicas, exact);
criterion_main!(benches);
