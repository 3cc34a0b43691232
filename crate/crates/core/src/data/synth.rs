use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, GrayImage};
use crate::error::{config_err, Result};
use crate::readout::LabelVector;

/// Two-class images, each holding a pair of Gaussian blobs side by side.
///
/// Class 0 blobs share one peak value; in class 1 the second peak is offset from
/// the first by `offset` grey levels (modulo 256). Each peak on its own is
/// uniformly distributed in both classes, so the label lives only in how the two
/// blobs relate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub per_class: usize,
    pub size: usize,
    pub sigma: (f64, f64),
    /// Horizontal distance between the two blob centres, pixels.
    pub separation: f64,
    /// Maximum centre displacement of the pair, pixels.
    pub jitter: f64,
    pub amplitude: (f64, f64),
    pub offset: f64,
    /// Standard deviation of additive pixel noise, grey levels.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            per_class: 300,
            size: 12,
            sigma: (1.0, 1.6),
            separation: 8.0,
            jitter: 1.0,
            amplitude: (0.0, 256.0),
            offset: 128.0,
            noise: 30.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let range_ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi;
        if self.per_class < 1 || self.size < 1 {
            return config_err("synthetic set needs at least one sample per class and a non-empty image");
        }
        if !range_ok(self.sigma) || self.sigma.0 == 0.0 || !range_ok(self.amplitude) || self.amplitude.1 > 256.0 {
            return config_err("blob width must be positive and amplitudes within [0, 256]");
        }
        if !(self.jitter >= 0.0 && self.noise >= 0.0 && self.separation >= 0.0 && self.offset.is_finite()) {
            return config_err("separation, jitter and noise must be non-negative");
        }
        Ok(())
    }
}

/// Generates `2 * per_class` images, labels alternating 0, 1, 0, 1, ...
pub fn synth_blobs(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.size;
    let centre = (n as f64 - 1.0) / 2.0;
    let mut images = Vec::with_capacity(2 * config.per_class);
    let mut labels = Vec::with_capacity(2 * config.per_class);
    for i in 0..2 * config.per_class {
        let class = i % 2;
        let sigma = uniform(&mut rng, config.sigma);
        let first = uniform(&mut rng, config.amplitude);
        let second = if class == 0 { first } else { (first + config.offset).rem_euclid(256.0) };
        let cy = centre + uniform(&mut rng, (-config.jitter, config.jitter));
        let cx = centre + uniform(&mut rng, (-config.jitter, config.jitter));
        let blobs = [(cx - config.separation / 2.0, first), (cx + config.separation / 2.0, second)];
        let mut pixels = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                let mut v = config.noise * gaussian(&mut rng);
                for (bx, amp) in blobs {
                    let d2 = (r as f64 - cy).powi(2) + (c as f64 - bx).powi(2);
                    v += amp * (-d2 / (2.0 * sigma * sigma)).exp();
                }
                pixels.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
        images.push(GrayImage::new(n, n, pixels)?);
        labels.push(class);
    }
    Dataset::new("synthetic-blobs", images, LabelVector::new(labels, 2)?)
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_balanced() {
        let cfg = SynthConfig { per_class: 20, ..SynthConfig::default() };
        let a = synth_blobs(&cfg).unwrap();
        let b = synth_blobs(&cfg).unwrap();
        assert_eq!(a.len(), 40);
        assert_eq!(a.labels().class_counts(), vec![20, 20]);
        assert!((0..a.len()).all(|i| a.image(i) == b.image(i)));
        let c = synth_blobs(&SynthConfig { seed: 1, ..cfg }).unwrap();
        assert!((0..a.len()).any(|i| a.image(i) != c.image(i)));
    }

    #[test]
    fn class_one_peaks_differ_by_offset() {
        let cfg = SynthConfig { per_class: 50, noise: 0.0, jitter: 0.0, sigma: (0.5, 0.5), separation: 4.0, size: 9, ..SynthConfig::default() };
        let ds = synth_blobs(&cfg).unwrap();
        for i in 0..ds.len() {
            let img = ds.image(i);
            let (a, b) = (img.get(4, 2) as f64, img.get(4, 6) as f64);
            let diff = (b - a).rem_euclid(256.0);
            if ds.labels().get(i) == 0 {
                assert_eq!(a, b);
            } else {
                assert!((diff - 128.0).abs() <= 1.0, "{a} {b}");
            }
        }
    }

    #[test]
    fn rejects_bad_ranges() {
        assert!(synth_blobs(&SynthConfig { sigma: (2.0, 1.0), ..SynthConfig::default() }).is_err());
        assert!(synth_blobs(&SynthConfig { noise: -1.0, ..SynthConfig::default() }).is_err());
        assert!(synth_blobs(&SynthConfig { amplitude: (0.0, 300.0), ..SynthConfig::default() }).is_err());
    }
}
