//! Rotating scattering disk.
//!
//! The disk carries a thin random phase screen. The screen is never stored: a
//! value at any disk coordinate is computed from `(seed, coordinate)` by
//! smoothing hashed white noise with a Gaussian kernel, then mapping the unit
//! normal result through its CDF so phases are uniform on `[0, phase_amplitude)`.
//!
//! The beam's footprint in the Fourier plane sits at a fixed lab position,
//! `annulus_radius` pixels from the disk centre. Rotating the disk by one step
//! moves a new patch of screen under the footprint.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{config_err, Result};
use crate::optics::FieldGrid;

pub const STEPS_PER_REVOLUTION: u32 = 4096;

/// Kernel taps beyond this many standard deviations are dropped.
const KERNEL_RADIUS_SIGMAS: f64 = 3.0;

/// Motor position, always reduced modulo one revolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AngularStep(u16);

impl AngularStep {
    pub fn new(step: i64) -> Self {
        Self(step.rem_euclid(STEPS_PER_REVOLUTION as i64) as u16)
    }

    pub fn get(self) -> u32 {
        self.0 as u32
    }

    pub fn offset(self, delta: i64) -> Self {
        Self::new(self.0 as i64 + delta)
    }

    pub fn angle(self) -> f64 {
        step_to_angle(self)
    }
}

impl std::fmt::Display for AngularStep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Disk rotation angle in radians for a motor step.
pub fn step_to_angle(step: AngularStep) -> f64 {
    2.0 * PI * step.get() as f64 / STEPS_PER_REVOLUTION as f64
}

/// Parameters of the phase screen and of the beam footprint on it (pixels).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffuserConfig {
    pub seed: u64,
    pub correlation_length: f64,
    pub footprint_size: usize,
    pub annulus_radius: f64,
    pub phase_amplitude: f64,
}

impl Default for DiffuserConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            correlation_length: 4.0,
            footprint_size: 1024,
            annulus_radius: 1300.0,
            phase_amplitude: 2.0 * PI,
        }
    }
}

impl DiffuserConfig {
    /// Geometry matching [`crate::optics::OpticsConfig::desk`].
    pub fn desk(seed: u64) -> Self {
        Self {
            seed,
            correlation_length: 2.0,
            footprint_size: 128,
            annulus_radius: 325.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.correlation_length >= 1.0 && self.correlation_length.is_finite()) {
            return config_err(format!(
                "correlation_length must be at least 1 pixel, got {}",
                self.correlation_length
            ));
        }
        if self.footprint_size == 0 {
            return config_err("footprint_size must be at least 1");
        }
        if !(self.annulus_radius > self.footprint_size as f64 / 2.0) {
            return config_err(format!(
                "annulus_radius {} must exceed half the footprint ({})",
                self.annulus_radius,
                self.footprint_size as f64 / 2.0
            ));
        }
        if !(self.phase_amplitude > 0.0 && self.phase_amplitude.is_finite()) {
            return config_err("phase_amplitude must be positive");
        }
        Ok(())
    }
}

/// Lazily evaluated random phase screen covering the whole disk.
#[derive(Debug, Clone)]
pub struct DiffuserScreen {
    config: DiffuserConfig,
    texture: SmoothNoise,
}

/// Builds a screen from explicit geometry; see [`DiffuserScreen::synth`].
pub fn synth_screen(
    seed: u64,
    correlation_length: f64,
    footprint_size: usize,
    annulus_radius: f64,
) -> Result<DiffuserScreen> {
    DiffuserScreen::synth(&DiffuserConfig {
        seed,
        correlation_length,
        footprint_size,
        annulus_radius,
        ..DiffuserConfig::default()
    })
}

impl DiffuserScreen {
    pub fn synth(config: &DiffuserConfig) -> Result<Self> {
        config.validate()?;
        let texture = SmoothNoise::new(config.seed, 1.0, config.correlation_length);
        Ok(Self { config: config.clone(), texture })
    }

    pub fn config(&self) -> &DiffuserConfig {
        &self.config
    }

    /// Screen phase in `[0, phase_amplitude)` at disk coordinate `(x, y)`.
    pub fn phase_at(&self, x: f64, y: f64) -> f64 {
        self.to_phase(self.texture.value_at(x, y))
    }

    fn to_phase(&self, z: f64) -> f64 {
        // Guard the open upper end against rounding of the CDF to exactly 1.
        (self.config.phase_amplitude * normal_cdf(z)).min(self.config.phase_amplitude * (1.0 - f64::EPSILON))
    }

    /// Disk coordinates under the footprint pixel at offset `(dy, dx)` when rotated by `theta`.
    fn disk_coordinate(&self, theta: f64, dy: f64, dx: f64) -> (f64, f64) {
        let lx = self.config.annulus_radius + dx;
        let ly = dy;
        let (s, c) = theta.sin_cos();
        (lx * c + ly * s, -lx * s + ly * c)
    }

    /// Footprint offsets, centred on zero frequency.
    fn offsets(&self) -> impl Iterator<Item = i64> + Clone {
        let f = self.config.footprint_size as i64;
        -(f / 2)..(f - f / 2)
    }

    /// Screen phase over the footprint at a given step, row-major `F x F`.
    pub fn footprint_phase(&self, step: AngularStep) -> Vec<f64> {
        let theta = step_to_angle(step);
        let coords: Vec<(f64, f64)> = self
            .offsets()
            .flat_map(|dy| self.offsets().map(move |dx| (dy, dx)))
            .map(|(dy, dx)| self.disk_coordinate(theta, dy as f64, dx as f64))
            .collect();
        let texture = self.texture.patch_for(&coords);
        coords.iter().map(|&(x, y)| self.to_phase(texture.value_at(x, y))).collect()
    }

    /// Pure-phase transfer function at a motor step, embedded in a `pad_size` grid.
    ///
    /// Inside the footprint `H = exp(j * phase)`; outside it `H = 1`. The grid is
    /// in native DFT order.
    pub fn transfer_at_step(&self, step: AngularStep, pad_size: usize) -> Result<FieldGrid> {
        if self.config.footprint_size > pad_size {
            return config_err(format!(
                "footprint {} larger than the {pad_size} grid",
                self.config.footprint_size
            ));
        }
        let phase = self.footprint_phase(step);
        let n = pad_size as i64;
        let mut values = vec![Complex64::new(1.0, 0.0); pad_size * pad_size];
        let mut k = 0;
        for dy in self.offsets() {
            let row = dy.rem_euclid(n) as usize;
            for dx in self.offsets() {
                let col = dx.rem_euclid(n) as usize;
                let (s, c) = phase[k].sin_cos();
                values[row * pad_size + col] = Complex64::new(c, s);
                k += 1;
            }
        }
        Ok(FieldGrid::from_raw(pad_size, pad_size, values))
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Gaussian-smoothed white noise on an integer lattice with spacing `cell` pixels,
/// normalized to unit variance and bilinearly interpolated between lattice points.
#[derive(Debug, Clone)]
struct SmoothNoise {
    seed: u64,
    cell: f64,
    taps: Vec<f64>,
    radius: i64,
    norm: f64,
}

impl SmoothNoise {
    fn new(seed: u64, cell: f64, sigma_cells: f64) -> Self {
        let radius = (KERNEL_RADIUS_SIGMAS * sigma_cells).ceil() as i64;
        let taps: Vec<f64> = (-radius..=radius)
            .map(|k| (-(k * k) as f64 / (2.0 * sigma_cells * sigma_cells)).exp())
            .collect();
        // Var of the separable sum of unit normals is (sum g^2)^2.
        let norm = taps.iter().map(|g| g * g).sum::<f64>();
        Self { seed, cell, taps, radius, norm }
    }

    fn white(&self, i: i64, j: i64) -> f64 {
        let h = mix(mix(mix(self.seed) ^ i as u64) ^ (j as u64).rotate_left(32));
        let u1 = ((h >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
        let u2 = ((mix(h) >> 11) as f64) / (1u64 << 53) as f64;
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    /// Smoothed value at a lattice point, by direct summation.
    fn lattice_value(&self, i: i64, j: i64) -> f64 {
        let mut acc = 0.0;
        for (a, ga) in (-self.radius..=self.radius).zip(&self.taps) {
            let mut row = 0.0;
            for (b, gb) in (-self.radius..=self.radius).zip(&self.taps) {
                row += gb * self.white(i - a, j - b);
            }
            acc += ga * row;
        }
        acc / self.norm
    }

    fn value_at(&self, x: f64, y: f64) -> f64 {
        let (u, v) = (x / self.cell, y / self.cell);
        let (i0, j0) = (u.floor() as i64, v.floor() as i64);
        let (fu, fv) = (u - i0 as f64, v - j0 as f64);
        let p00 = self.lattice_value(i0, j0);
        let p10 = self.lattice_value(i0 + 1, j0);
        let p01 = self.lattice_value(i0, j0 + 1);
        let p11 = self.lattice_value(i0 + 1, j0 + 1);
        bilerp(p00, p10, p01, p11, fu, fv)
    }

    /// Materializes the smoothed lattice over the bounding box of `coords`.
    fn patch_for(&self, coords: &[(f64, f64)]) -> Patch {
        let (mut imin, mut imax, mut jmin, mut jmax) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
        for &(x, y) in coords {
            let (i, j) = ((x / self.cell).floor() as i64, (y / self.cell).floor() as i64);
            imin = imin.min(i);
            imax = imax.max(i + 1);
            jmin = jmin.min(j);
            jmax = jmax.max(j + 1);
        }
        let r = self.radius;
        // Raw noise over the box grown by the kernel radius, indexed [i][j].
        let (ri0, rj0) = (imin - r, jmin - r);
        let rh = (imax - imin + 1 + 2 * r) as usize;
        let rw = (jmax - jmin + 1 + 2 * r) as usize;
        let mut raw = vec![0.0; rh * rw];
        for a in 0..rh {
            for b in 0..rw {
                raw[a * rw + b] = self.white(ri0 + a as i64, rj0 + b as i64);
            }
        }
        let h = (imax - imin + 1) as usize;
        let w = (jmax - jmin + 1) as usize;
        // Smooth along j, then along i.
        let mut along_j = vec![0.0; rh * w];
        for a in 0..rh {
            for b in 0..w {
                let src = &raw[a * rw + b..a * rw + b + self.taps.len()];
                // Tap k pairs with offset (k - r); reverse so taps align with j - b'.
                along_j[a * w + b] = src.iter().rev().zip(&self.taps).map(|(x, g)| x * g).sum();
            }
        }
        let mut values = vec![0.0; h * w];
        for a in 0..h {
            for b in 0..w {
                let mut acc = 0.0;
                for (k, g) in self.taps.iter().enumerate() {
                    acc += g * along_j[(a + self.taps.len() - 1 - k) * w + b];
                }
                values[a * w + b] = acc / self.norm;
            }
        }
        Patch { cell: self.cell, i0: imin, j0: jmin, w, values }
    }
}

struct Patch {
    cell: f64,
    i0: i64,
    j0: i64,
    w: usize,
    values: Vec<f64>,
}

impl Patch {
    fn at(&self, i: i64, j: i64) -> f64 {
        self.values[(i - self.i0) as usize * self.w + (j - self.j0) as usize]
    }

    fn value_at(&self, x: f64, y: f64) -> f64 {
        let (u, v) = (x / self.cell, y / self.cell);
        let (i0, j0) = (u.floor() as i64, v.floor() as i64);
        let (fu, fv) = (u - i0 as f64, v - j0 as f64);
        bilerp(
            self.at(i0, j0),
            self.at(i0 + 1, j0),
            self.at(i0, j0 + 1),
            self.at(i0 + 1, j0 + 1),
            fu,
            fv,
        )
    }
}

#[inline]
fn bilerp(p00: f64, p10: f64, p01: f64, p11: f64, fu: f64, fv: f64) -> f64 {
    let a = p00 + (p10 - p00) * fu;
    let b = p01 + (p11 - p01) * fu;
    a + (b - a) * fv
}

/// SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
