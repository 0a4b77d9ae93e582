use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use catenergy::dcov::{dcov_independence_test, dcov_permutation_test, multinomial_eigenvalues};
use catenergy::linalg::symmetric_eigenvalues;
use catenergy::quadform::{upper_tail_farebrother, upper_tail_imhof};
use catenergy::{ProbabilityVector, RngStream};
use catenergy_bench::{geometric_spectrum, null_tables};

fn dcov_tests(c: &mut Criterion) {
    let tables = null_tables(4, 8, 100, 64, 7);
    let mut group = c.benchmark_group("dcov_4x8_n100");
    group.bench_function("asymptotic", |b| {
        let mut i = 0;
        b.iter(|| {
            i = (i + 1) % tables.len();
            black_box(dcov_independence_test(&tables[i]).map(|o| o.p_value))
        })
    });
    group.bench_function("permutation_b999", |b| {
        let mut rng = RngStream::new(3).rng();
        let mut i = 0;
        b.iter(|| {
            i = (i + 1) % tables.len();
            black_box(dcov_permutation_test(&tables[i], 999, &mut rng).map(|o| o.p_value))
        })
    });
    group.finish();
}

fn spectra(c: &mut Criterion) {
    let mut group = c.benchmark_group("multinomial_spectrum");
    for k in [4usize, 8, 32] {
        let raw: Vec<f64> = (1..=k).map(|i| 0.5f64.powi(i as i32)).collect();
        let total: f64 = raw.iter().sum();
        let p = ProbabilityVector::new(raw.iter().map(|v| v / total).collect()).unwrap();
        group.bench_with_input(BenchmarkId::new("secular", k), &p, |b, p| {
            b.iter(|| black_box(multinomial_eigenvalues(p)))
        });
        let cov = catenergy::dcov::multinomial_cov(&p);
        group.bench_with_input(BenchmarkId::new("jacobi", k), &cov, |b, cov| {
            b.iter(|| black_box(symmetric_eigenvalues(cov.matrix())))
        });
    }
    group.finish();
}

fn tail_methods(c: &mut Criterion) {
    let mut group = c.benchmark_group("upper_tail");
    for (dim, spread) in [(6usize, 10.0), (21, 100.0), (64, 1000.0)] {
        let s = geometric_spectrum(dim, spread);
        let x = s.mean() + s.variance().sqrt();
        let label = format!("{dim}w_{spread}");
        group.bench_with_input(BenchmarkId::new("farebrother", &label), &s, |b, s| {
            b.iter(|| black_box(upper_tail_farebrother(s, x, 1e-9).map(|r| r.p)))
        });
        group.bench_with_input(BenchmarkId::new("imhof", &label), &s, |b, s| {
            b.iter(|| black_box(upper_tail_imhof(s, x, 1e-8).map(|r| r.p)))
        });
    }
    group.finish();
}

criterion_group!(benches, dcov_tests, spectra, tail_methods);
criterion_main!(benches);
