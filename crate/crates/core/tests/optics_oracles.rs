use std::f64::consts::PI;

use num_complex::Complex64;
use ornn_core::optics::{propagate_through_kernel, Fft2};
use ornn_core::{AngularStep, DiffuserConfig, DiffuserScreen, FieldGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(h: usize, w: usize, seed: u64) -> FieldGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FieldGrid::from_fn(h, w, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn max_abs_diff(a: &FieldGrid, b: &FieldGrid) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn naive_dft(field: &FieldGrid) -> Vec<Complex64> {
    let (h, w) = field.dims();
    let scale = 1.0 / ((h * w) as f64).sqrt();
    let mut out = vec![Complex64::new(0.0, 0.0); h * w];
    for k in 0..h {
        for l in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..h {
                for c in 0..w {
                    let angle = -2.0 * PI * ((k * r) as f64 / h as f64 + (l * c) as f64 / w as f64);
                    acc += field.get(r, c) * Complex64::from_polar(1.0, angle);
                }
            }
            out[k * w + l] = acc * scale;
        }
    }
    out
}

#[test]
fn transform_matches_direct_sum() {
    for (h, w) in [(8, 8), (6, 10), (7, 5)] {
        let f = random_field(h, w, (h * 31 + w) as u64);
        let fft = Fft2::new(h, w);
        let mut fast = f.values().to_vec();
        fft.forward(&mut fast);
        let slow = naive_dft(&f);
        let err = fast.iter().zip(&slow).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{h}x{w}: {err}");
        fft.inverse(&mut fast);
        let back = FieldGrid::new(h, w, fast).unwrap();
        assert!(max_abs_diff(&back, &f) < 1e-12);
    }
}

#[test]
fn identity_kernel_round_trip_on_random_fields() {
    for seed in 0..5 {
        let f = random_field(32, 48, seed);
        let out = propagate_through_kernel(&f, &FieldGrid::filled(32, 48, Complex64::new(1.0, 0.0))).unwrap();
        let rel = max_abs_diff(&out, &f) / f.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(rel <= 1e-10, "relative error {rel}");
    }
}

// A linear phase ramp in frequency is a circular shift in space.
#[test]
fn shift_theorem() {
    let (h, w) = (16, 24);
    let f = random_field(h, w, 7);
    for (dy, dx) in [(0usize, 1usize), (3, 0), (5, 17), (15, 23)] {
        let ramp = FieldGrid::from_fn(h, w, |k, l| {
            Complex64::from_polar(1.0, -2.0 * PI * ((k * dy) as f64 / h as f64 + (l * dx) as f64 / w as f64))
        });
        let out = propagate_through_kernel(&f, &ramp).unwrap();
        let shifted = FieldGrid::from_fn(h, w, |r, c| f.get((r + h - dy) % h, (c + w - dx) % w));
        let err = max_abs_diff(&out, &shifted);
        assert!(err <= 1e-9, "shift ({dy},{dx}): {err}");
    }
}

#[test]
fn diffuser_kernels_conserve_energy() {
    let screen = DiffuserScreen::synth(&DiffuserConfig::desk(17)).unwrap();
    let f = random_field(128, 128, 3);
    for step in [0, 1, 1000, 4095] {
        let h = screen.transfer_at_step(AngularStep::new(step), 128).unwrap();
        let out = propagate_through_kernel(&f, &h).unwrap();
        let rel = (out.energy() - f.energy()).abs() / f.energy();
        assert!(rel <= 1e-9, "step {step}: {rel}");
    }
}
