use crate::error::{input_err, Result};
use crate::grid::RealGrid;
use crate::optics::OpticsConfig;

/// Bilinear upsampling by an integer factor, pixel-centre aligned with edge clamping.
pub fn bilinear_upsample(src: &RealGrid, factor: usize) -> RealGrid {
    assert!(factor >= 1, "upsampling factor must be at least 1");
    let (h, w) = src.dims();
    let f = factor as f64;
    let source_coord = |i: usize, len: usize| -> (usize, usize, f64) {
        let x = ((i as f64 + 0.5) / f - 0.5).clamp(0.0, (len - 1) as f64);
        let lo = x.floor() as usize;
        let hi = (lo + 1).min(len - 1);
        (lo, hi, x - lo as f64)
    };
    let rows: Vec<_> = (0..h * factor).map(|r| source_coord(r, h)).collect();
    let cols: Vec<_> = (0..w * factor).map(|c| source_coord(c, w)).collect();
    RealGrid::from_fn(h * factor, w * factor, |r, c| {
        let (r0, r1, fr) = rows[r];
        let (c0, c1, fc) = cols[c];
        let top = src.get(r0, c0) * (1.0 - fc) + src.get(r0, c1) * fc;
        let bottom = src.get(r1, c0) * (1.0 - fc) + src.get(r1, c1) * fc;
        top * (1.0 - fr) + bottom * fr
    })
}

/// Largest integer factor by which a `h x w` sample still fits on the modulator.
pub fn upsampling_factor(h: usize, w: usize, config: &OpticsConfig) -> usize {
    (config.slm_height / h).min(config.slm_width / w)
}

/// Upsamples a sample to fill the modulator, centres it and zero-pads the rest.
pub fn prepare_for_slm(sample: &RealGrid, config: &OpticsConfig) -> Result<RealGrid> {
    let (h, w) = sample.dims();
    let factor = upsampling_factor(h, w, config);
    if factor == 0 {
        return input_err(format!(
            "sample {h}x{w} is larger than the {}x{} modulator",
            config.slm_height, config.slm_width
        ));
    }
    let up = bilinear_upsample(sample, factor);
    let top = (config.slm_height - up.height()) / 2;
    let left = (config.slm_width - up.width()) / 2;
    let mut out = RealGrid::zeros(config.slm_height, config.slm_width);
    for r in 0..up.height() {
        for c in 0..up.width() {
            out.set(top + r, left + c, up.get(r, c));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fashion_sized_sample_upsamples_by_21() {
        assert_eq!(upsampling_factor(28, 28, &OpticsConfig::default()), 21);
    }

    #[test]
    fn constant_image_stays_constant_with_zero_border() {
        let cfg = OpticsConfig::default();
        let out = prepare_for_slm(&RealGrid::filled(28, 28, 77.0), &cfg).unwrap();
        assert_eq!(out.dims(), (600, 800));
        // 588x588 block at rows 6..594, cols 106..694.
        for r in 0..600 {
            for c in 0..800 {
                let inside = (6..594).contains(&r) && (106..694).contains(&c);
                let expected = if inside { 77.0 } else { 0.0 };
                assert!((out.get(r, c) - expected).abs() < 1e-12, "({r},{c})");
            }
        }
    }

    #[test]
    fn single_pixel_becomes_uniform_block() {
        let up = bilinear_upsample(&RealGrid::filled(1, 1, 9.0), 5);
        assert_eq!(up.dims(), (5, 5));
        assert!(up.data().iter().all(|v| *v == 9.0));
    }

    #[test]
    fn upsample_interpolates_between_centres() {
        let src = RealGrid::new(1, 2, vec![0.0, 4.0]).unwrap();
        let up = bilinear_upsample(&src, 2);
        assert_eq!(up.dims(), (2, 4));
        assert_eq!(up.row(0), &[0.0, 1.0, 3.0, 4.0]);
        assert_eq!(up.row(1), up.row(0));
    }

    #[test]
    fn oversized_sample_is_rejected() {
        let cfg = OpticsConfig::desk();
        assert!(prepare_for_slm(&RealGrid::zeros(49, 10), &cfg).is_err());
        assert_eq!(prepare_for_slm(&RealGrid::zeros(48, 64), &cfg).unwrap().dims(), (48, 64));
    }
}
