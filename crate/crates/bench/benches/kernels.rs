use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use steepfield::covariance::{AvgPoint, Kernel};
use steepfield::fractal::CellKernel;
use steepfield::specfun::{bessel_k, Green};

fn special_functions(c: &mut Criterion) {
    let green = Green::get(3).unwrap();
    c.bench_function("green value nu=3", |b| b.iter(|| green.value(black_box(0.37))));
    c.bench_function("bessel K order 2.5", |b| b.iter(|| bessel_k(2.5, black_box(1.3)).unwrap()));
}

fn covariance(c: &mut Criterion) {
    let kernel = Kernel::new(2).unwrap();
    let a = AvgPoint::new(vec![0.0, 0.0], 0.3).unwrap();
    let b = AvgPoint::new(vec![0.3, 0.0], 0.2).unwrap();
    c.bench_function("kernel general regime nu=2", |bch| bch.iter(|| kernel.cov(black_box(&a), black_box(&b)).unwrap()));
    let d = AvgPoint::new(vec![0.9, 0.0], 0.3).unwrap();
    c.bench_function("kernel disjoint nu=2", |bch| bch.iter(|| kernel.cov(black_box(&a), black_box(&d)).unwrap()));
}

fn cell_kernel(c: &mut Criterion) {
    c.bench_function("cell kernel build nu=2 alpha=1", |b| {
        b.iter(|| {
            let mut k = CellKernel::new(2, black_box(1.0)).unwrap();
            k.unit(&[0, 1])
        })
    });
}

criterion_group!(benches, special_functions, covariance, cell_kernel);
criterion_main!(benches);
