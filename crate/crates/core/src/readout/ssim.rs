use crate::error::{input_err, Result};
use crate::grid::RealGrid;
use crate::optics::CameraFrame;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

/// Structural similarity between two camera frames.
///
/// Quantized frames use `L = 2^bits - 1` as dynamic range; unquantized frames use
/// the larger of the two frame maxima.
pub fn ssim(a: &CameraFrame, b: &CameraFrame) -> Result<f64> {
    if a.bit_depth() != b.bit_depth() {
        return input_err(format!("bit depths differ: {:?} vs {:?}", a.bit_depth(), b.bit_depth()));
    }
    let range = match a.bit_depth() {
        Some(bits) => ((1u32 << bits) - 1) as f64,
        None => {
            let m = a.intensities().max().max(b.intensities().max());
            if m > 0.0 {
                m
            } else {
                1.0
            }
        }
    };
    ssim_grids(a.intensities(), b.intensities(), range)
}

/// Mean SSIM over every fully contained Gaussian window.
///
/// The window is 11x11 with sigma 1.5, shrunk to the image size for images
/// smaller than that.
pub fn ssim_grids(a: &RealGrid, b: &RealGrid, dynamic_range: f64) -> Result<f64> {
    if a.dims() != b.dims() {
        return input_err(format!("image sizes differ: {:?} vs {:?}", a.dims(), b.dims()));
    }
    let (h, w) = a.dims();
    let win_h = SSIM_WINDOW.min(h);
    let win_w = SSIM_WINDOW.min(w);
    let gy = gaussian_taps(win_h);
    let gx = gaussian_taps(win_w);
    let c1 = (K1 * dynamic_range).powi(2);
    let c2 = (K2 * dynamic_range).powi(2);

    let ab: Vec<f64> = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    let aa: Vec<f64> = a.data().iter().map(|x| x * x).collect();
    let bb: Vec<f64> = b.data().iter().map(|x| x * x).collect();
    let mu_a = filter_valid(a.data(), h, w, &gy, &gx);
    let mu_b = filter_valid(b.data(), h, w, &gy, &gx);
    let e_aa = filter_valid(&aa, h, w, &gy, &gx);
    let e_bb = filter_valid(&bb, h, w, &gy, &gx);
    let e_ab = filter_valid(&ab, h, w, &gy, &gx);

    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let num = (2.0 * (ma * mb) + c1) * (2.0 * cov + c2);
        let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
        total += num / den;
    }
    Ok(total / mu_a.len() as f64)
}

pub(crate) fn gaussian_taps(size: usize) -> Vec<f64> {
    let centre = (size as f64 - 1.0) / 2.0;
    let taps: Vec<f64> = (0..size)
        .map(|k| (-(k as f64 - centre).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable correlation keeping only windows that fit inside the image.
fn filter_valid(data: &[f64], h: usize, w: usize, gy: &[f64], gx: &[f64]) -> Vec<f64> {
    let ow = w - gx.len() + 1;
    let oh = h - gy.len() + 1;
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        let src = &data[r * w..(r + 1) * w];
        for c in 0..ow {
            rows[r * ow + c] = gx.iter().zip(&src[c..]).map(|(g, v)| g * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for (k, g) in gy.iter().enumerate() {
            let src = &rows[(r + k) * ow..(r + k + 1) * ow];
            for (o, v) in out[r * ow..(r + 1) * ow].iter_mut().zip(src) {
                *o += g * v;
            }
        }
    }
    out
}
