use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ornn_bench::{desk_pipeline, ridge_problem};
use ornn_core::optics::{propagate_with, Fft2};
use ornn_core::readout::{ridge_fit, ssim};
use ornn_core::{AngularStep, DiffuserConfig, DiffuserScreen, FieldGrid};

fn propagation(c: &mut Criterion) {
    let mut g = c.benchmark_group("propagation");
    for n in [128usize, 256, 512] {
        let screen = DiffuserScreen::synth(&DiffuserConfig { footprint_size: n, ..DiffuserConfig::desk(3) }).unwrap();
        let kernel = screen.transfer_at_step(AngularStep::new(100), n).unwrap();
        let field = FieldGrid::from_fn(n, n, |r, c| num_complex::Complex64::from_polar(1.0, (r * 31 + c * 17) as f64 * 0.01));
        let fft = Fft2::new(n, n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| propagate_with(&fft, black_box(&field), &kernel).unwrap())
        });
    }
    g.finish();
}

fn kernel_synthesis(c: &mut Criterion) {
    let screen = DiffuserScreen::synth(&DiffuserConfig::desk(3)).unwrap();
    c.bench_function("transfer_at_step/128", |b| b.iter(|| screen.transfer_at_step(black_box(AngularStep::new(77)), 128).unwrap()));
}

fn fitness(c: &mut Criterion) {
    let p = desk_pipeline(50);
    let mut g = c.benchmark_group("fitness");
    g.sample_size(10);
    g.bench_function("desk/100_samples", |b| b.iter(|| p.evaluate(black_box(AngularStep::new(1234))).unwrap()));
    g.finish();
}

fn ridge(c: &mut Criterion) {
    let mut g = c.benchmark_group("ridge_fit");
    for (n, d) in [(2400usize, 192usize), (2400, 960)] {
        let (x, y) = ridge_problem(n, d, 10);
        g.bench_with_input(BenchmarkId::new("n_d", format!("{n}x{d}")), &d, |b, _| b.iter(|| ridge_fit(black_box(&x), &y, 1.0).unwrap()));
    }
    g.finish();
}

fn structural_similarity(c: &mut Criterion) {
    let p = desk_pipeline(5);
    let a = p.capture(0, AngularStep::new(0)).unwrap();
    let b = p.capture(0, AngularStep::new(1)).unwrap();
    c.bench_function("ssim/48x64", |bench| bench.iter(|| ssim(black_box(&a), &b).unwrap()));
}

criterion_group!(benches, propagation, kernel_synthesis, fitness, ridge, structural_similarity);
criterion_main!(benches);
