use std::f64::consts::PI;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use spectral3::inverse::kernel::combined_kernel;
use spectral3::{compute_spectral_data, inverse, CoefficientPair, Grid, InverseOptions, C64};

fn smooth(m: usize) -> CoefficientPair {
    CoefficientPair::from_fns(
        Grid::new(m).unwrap(),
        |x| C64::new((2.0 * PI * x).cos(), 0.0),
        |x| C64::new(0.0, 0.3 * (PI * x).sin()),
    )
}

fn forward(c: &mut Criterion) {
    let coeffs = smooth(512);
    c.bench_function("spectral_data n_max=16 M=512", |b| {
        b.iter(|| compute_spectral_data(black_box(&coeffs), 16).unwrap())
    });
}

fn inverse_n8(c: &mut Criterion) {
    let coeffs = smooth(256);
    let data = compute_spectral_data(&coeffs, 8).unwrap();
    let grid = coeffs.grid();
    let mut g = c.benchmark_group("inverse");
    g.sample_size(10);
    g.bench_function("N=8 M=256", |b| b.iter(|| inverse(black_box(&data), grid, &InverseOptions::new(8)).unwrap()));
    g.finish();
}

fn kernel(c: &mut Criterion) {
    let coeffs = smooth(512);
    let data = compute_spectral_data(&coeffs, 4).unwrap();
    let (_, cache) = inverse(&data, coeffs.grid(), &InverseOptions::new(4)).unwrap();
    let grid = coeffs.grid();
    let (u, v) = (&cache.entries[1], &cache.entries[6]);
    c.bench_function("combined_kernel M=512", |b| {
        b.iter(|| {
            combined_kernel(black_box(&u.eta), u.a, &v.phi, v.v.k + 1, u.lambda, v.lambda, false, None, grid).unwrap()
        })
    });
}

criterion_group!(benches, forward, inverse_n8, kernel);
criterion_main!(benches);
