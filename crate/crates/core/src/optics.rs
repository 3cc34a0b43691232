//! Coherent optical path: phase encoding on the modulator, Fourier-plane
//! filtering by the diffuser, intensity detection and camera quantization.
//!
//! Transforms use the unitary DFT convention (`1/sqrt(N)` on both the forward
//! and the inverse transform), so a pure-phase transfer function conserves
//! the field energy exactly up to rounding. Frequency-plane grids are stored
//! in native DFT order: the zero frequency sits at index `(0, 0)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::data::prepare_for_slm;
use crate::error::{config_err, input_err, Error, Result};
use crate::grid::RealGrid;

/// Headroom below full scale so that an exactly saturated pixel maps to the top code.
pub const SATURATION_EPSILON: f64 = 1.0 / 8_388_608.0; // 2^-23

/// Fraction of the saturation level that the calibration percentile is mapped to.
pub const CALIBRATION_HEADROOM: f64 = 0.9;

/// 2D complex optical field on a uniform pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    height: usize,
    width: usize,
    values: Vec<Complex64>,
}

impl FieldGrid {
    pub fn new(height: usize, width: usize, values: Vec<Complex64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return input_err(format!("field must be non-empty, got {height}x{width}"));
        }
        if values.len() != height * width {
            return input_err(format!(
                "field {height}x{width} needs {} values, got {}",
                height * width,
                values.len()
            ));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return input_err("field contains non-finite values");
        }
        Ok(Self { height, width, values })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, Complex64::new(0.0, 0.0))
    }

    pub fn filled(height: usize, width: usize, value: Complex64) -> Self {
        assert!(height > 0 && width > 0, "field must be non-empty");
        Self { height, width, values: vec![value; height * width] }
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Self {
        assert!(height > 0 && width > 0, "field must be non-empty");
        let mut values = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self { height, width, values }
    }

    pub(crate) fn from_raw(height: usize, width: usize, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), height * width);
        Self { height, width, values }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.values[row * self.width + col]
    }

    /// Sum of `|v|^2` over the grid.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn scale(&self, factor: Complex64) -> FieldGrid {
        Self::from_raw(self.height, self.width, self.values.iter().map(|v| v * factor).collect())
    }
}

/// Non-negative intensity image as seen by the camera.
///
/// `bit_depth` is `None` until the frame has been through [`camera_capture`];
/// after that every value is an integer code in `[0, 2^bit_depth - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraFrame {
    intensities: RealGrid,
    bit_depth: Option<u8>,
    saturation_level: f64,
}

impl CameraFrame {
    pub fn new(intensities: RealGrid, saturation_level: f64) -> Result<Self> {
        if !(saturation_level > 0.0 && saturation_level.is_finite()) {
            return config_err(format!("saturation level must be positive, got {saturation_level}"));
        }
        if intensities.data().iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return input_err("camera intensities must be finite and non-negative");
        }
        Ok(Self { intensities, bit_depth: None, saturation_level })
    }

    /// Wraps already quantized codes, e.g. frames read back from disk.
    pub fn quantized(codes: RealGrid, bit_depth: u8, saturation_level: f64) -> Result<Self> {
        check_bit_depth(bit_depth)?;
        let top = ((1u32 << bit_depth) - 1) as f64;
        if codes.data().iter().any(|v| *v < 0.0 || *v > top || v.fract() != 0.0) {
            return input_err(format!("codes must be integers in [0, {top}]"));
        }
        let mut frame = Self::new(codes, saturation_level)?;
        frame.bit_depth = Some(bit_depth);
        Ok(frame)
    }

    pub fn intensities(&self) -> &RealGrid {
        &self.intensities
    }

    pub fn bit_depth(&self) -> Option<u8> {
        self.bit_depth
    }

    pub fn saturation_level(&self) -> f64 {
        self.saturation_level
    }

    pub fn height(&self) -> usize {
        self.intensities.height()
    }

    pub fn width(&self) -> usize {
        self.intensities.width()
    }

    pub fn scaled(&self, factor: f64) -> Result<CameraFrame> {
        let data = self.intensities.data().iter().map(|v| v * factor).collect();
        let grid = RealGrid::new(self.height(), self.width(), data)?;
        CameraFrame::new(grid, self.saturation_level)
    }
}

/// Geometry of the modulator, simulation grid and camera, in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpticsConfig {
    pub slm_height: usize,
    pub slm_width: usize,
    /// Side of the square simulation grid.
    pub pad_size: usize,
    pub camera_height: usize,
    pub camera_width: usize,
    /// `1/e` amplitude radius of the Gaussian beam. Infinite means flat illumination.
    pub beam_waist: f64,
    /// Phase delivered by a full-scale pixel value (value 256 would map to this).
    pub phase_depth: f64,
    pub saturation_level: f64,
}

impl Default for OpticsConfig {
    fn default() -> Self {
        Self {
            slm_height: 600,
            slm_width: 800,
            pad_size: 1024,
            camera_height: 480,
            camera_width: 640,
            beam_waist: 0.45 * 600.0,
            phase_depth: 2.0 * PI,
            saturation_level: 1.0,
        }
    }
}

impl OpticsConfig {
    /// A scaled-down bench: 48x64 modulator on a 128 grid, 48x64 camera.
    pub fn desk() -> Self {
        Self {
            slm_height: 48,
            slm_width: 64,
            pad_size: 128,
            camera_height: 48,
            camera_width: 64,
            beam_waist: 0.45 * 48.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("slm_height", self.slm_height),
            ("slm_width", self.slm_width),
            ("pad_size", self.pad_size),
            ("camera_height", self.camera_height),
            ("camera_width", self.camera_width),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return config_err(format!("{name} must be at least 1"));
        }
        let largest = self
            .slm_height
            .max(self.slm_width)
            .max(self.camera_height)
            .max(self.camera_width);
        if self.pad_size < largest {
            return config_err(format!(
                "pad_size {} smaller than the largest plane dimension {largest}",
                self.pad_size
            ));
        }
        if !(self.beam_waist > 0.0) {
            return config_err(format!("beam_waist must be positive, got {}", self.beam_waist));
        }
        if !(self.phase_depth > 0.0 && self.phase_depth.is_finite()) {
            return config_err(format!("phase_depth must be positive, got {}", self.phase_depth));
        }
        if !(self.saturation_level > 0.0 && self.saturation_level.is_finite()) {
            return config_err("saturation_level must be positive");
        }
        Ok(())
    }

    /// Top-left corner of a `h x w` window centred in the pad grid.
    pub fn centered_origin(&self, h: usize, w: usize) -> (usize, usize) {
        ((self.pad_size - h) / 2, (self.pad_size - w) / 2)
    }

    /// Gaussian amplitude envelope over the modulator.
    pub fn beam_amplitude(&self, row: usize, col: usize) -> f64 {
        if self.beam_waist.is_infinite() {
            return 1.0;
        }
        let cy = (self.slm_height as f64 - 1.0) / 2.0;
        let cx = (self.slm_width as f64 - 1.0) / 2.0;
        let dy = row as f64 - cy;
        let dx = col as f64 - cx;
        (-(dx * dx + dy * dy) / (self.beam_waist * self.beam_waist)).exp()
    }
}

/// Phase-encodes a sample image (pixel values in `[0, 255]`) onto the beam.
///
/// The sample is upsampled and centred on the modulator, each pixel value `v`
/// becomes the phase `phase_depth * v / 256`, and the modulated beam is placed
/// in the middle of the zero-filled pad grid.
pub fn encode_sample_phase(sample: &RealGrid, config: &OpticsConfig) -> Result<FieldGrid> {
    config.validate()?;
    if sample.data().iter().any(|v| !(0.0..=255.0).contains(v)) {
        return input_err("sample pixel values must lie in [0, 255]");
    }
    let slm = prepare_for_slm(sample, config)?;
    encode_slm_pattern(&slm, config)
}

/// Encodes a pattern that is already at modulator resolution.
pub fn encode_slm_pattern(pattern: &RealGrid, config: &OpticsConfig) -> Result<FieldGrid> {
    config.validate()?;
    if pattern.dims() != (config.slm_height, config.slm_width) {
        return config_err(format!(
            "pattern is {}x{}, modulator is {}x{}",
            pattern.height(),
            pattern.width(),
            config.slm_height,
            config.slm_width
        ));
    }
    let n = config.pad_size;
    let (top, left) = config.centered_origin(config.slm_height, config.slm_width);
    let mut values = vec![Complex64::new(0.0, 0.0); n * n];
    for r in 0..config.slm_height {
        let row = &mut values[(top + r) * n + left..(top + r) * n + left + config.slm_width];
        for (c, out) in row.iter_mut().enumerate() {
            let phase = config.phase_depth * pattern.get(r, c) / 256.0;
            *out = Complex64::from_polar(config.beam_amplitude(r, c), phase);
        }
    }
    Ok(FieldGrid::from_raw(n, n, values))
}

/// Reusable unitary 2D DFT plan for one grid shape.
#[derive(Clone)]
pub struct Fft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("height", &self.height).field("width", &self.width).finish()
    }
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.row_fwd, &self.col_fwd);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.row_inv, &self.col_inv);
    }

    fn run(&self, data: &mut [Complex64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.height * self.width, "buffer does not match plan");
        let scratch_len = rows
            .get_inplace_scratch_len()
            .max(cols.get_inplace_scratch_len());
        let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
        rows.process_with_scratch(data, &mut scratch);
        let mut t = vec![Complex64::new(0.0, 0.0); data.len()];
        transpose(data, &mut t, self.height, self.width);
        cols.process_with_scratch(&mut t, &mut scratch);
        transpose(&t, data, self.width, self.height);
        let norm = 1.0 / ((self.height * self.width) as f64).sqrt();
        data.iter_mut().for_each(|v| *v *= norm);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const BLOCK: usize = 32;
    for r0 in (0..rows).step_by(BLOCK) {
        for c0 in (0..cols).step_by(BLOCK) {
            for r in r0..(r0 + BLOCK).min(rows) {
                for c in c0..(c0 + BLOCK).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// `R = IDFT{ DFT{O} * H }` with the unitary convention.
pub fn propagate_through_kernel(field: &FieldGrid, transfer: &FieldGrid) -> Result<FieldGrid> {
    let fft = Fft2::new(field.height(), field.width());
    propagate_with(&fft, field, transfer)
}

/// Same as [`propagate_through_kernel`] with a caller-owned plan.
pub fn propagate_with(fft: &Fft2, field: &FieldGrid, transfer: &FieldGrid) -> Result<FieldGrid> {
    if field.dims() != transfer.dims() {
        return input_err(format!(
            "field is {:?} but transfer function is {:?}",
            field.dims(),
            transfer.dims()
        ));
    }
    if fft.dims() != field.dims() {
        return input_err("transform plan does not match the field shape");
    }
    let mut spectrum = field.values.clone();
    fft.forward(&mut spectrum);
    Ok(filter_spectrum(fft, &spectrum, transfer))
}

/// Applies a transfer function to a precomputed spectrum and returns to the image plane.
pub fn filter_spectrum(fft: &Fft2, spectrum: &[Complex64], transfer: &FieldGrid) -> FieldGrid {
    let mut buf: Vec<Complex64> =
        spectrum.iter().zip(transfer.values()).map(|(s, h)| s * h).collect();
    fft.inverse(&mut buf);
    FieldGrid::from_raw(fft.height, fft.width, buf)
}

/// Forward transform of a field, for callers that reuse one spectrum with many kernels.
pub fn spectrum_of(fft: &Fft2, field: &FieldGrid) -> Result<Vec<Complex64>> {
    if fft.dims() != field.dims() {
        return input_err("transform plan does not match the field shape");
    }
    let mut spectrum = field.values.clone();
    fft.forward(&mut spectrum);
    Ok(spectrum)
}

/// Crops the central camera window and returns `|R|^2` per pixel, unquantized.
pub fn measure_intensity(field: &FieldGrid, config: &OpticsConfig) -> Result<CameraFrame> {
    let (ch, cw) = (config.camera_height, config.camera_width);
    if ch == 0 || cw == 0 || ch > field.height() || cw > field.width() {
        return config_err(format!(
            "camera window {ch}x{cw} does not fit the {}x{} grid",
            field.height(),
            field.width()
        ));
    }
    let top = (field.height() - ch) / 2;
    let left = (field.width() - cw) / 2;
    let mut data = Vec::with_capacity(ch * cw);
    for r in top..top + ch {
        let row = &field.values[r * field.width() + left..r * field.width() + left + cw];
        data.extend(row.iter().map(|v| v.norm_sqr()));
    }
    CameraFrame::new(RealGrid::new(ch, cw, data)?, config.saturation_level)
}

/// Picks the single exposure gain used for a whole experiment.
///
/// The `target_percentile` intensity over every pixel of the batch is mapped to
/// 90% of the saturation level. When that percentile is zero (very sparse
/// frames) the batch maximum is used instead.
pub fn calibrate_exposure(frames: &[CameraFrame], target_percentile: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&target_percentile) {
        return config_err(format!("percentile must be in [0, 1], got {target_percentile}"));
    }
    let Some(first) = frames.first() else {
        return Err(Error::Calibration("empty calibration batch".into()));
    };
    let saturation = first.saturation_level();
    let mut all: Vec<f64> = frames.iter().flat_map(|f| f.intensities().data().iter().copied()).collect();
    let max = all.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::Calibration("calibration batch is all zero".into()));
    }
    let k = nearest_rank(all.len(), target_percentile);
    let (_, q, _) = all.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
    let reference = if *q > 0.0 { *q } else { max };
    Ok(CALIBRATION_HEADROOM * saturation / reference)
}

/// Zero-based nearest-rank index of percentile `p` among `n` sorted values.
pub(crate) fn nearest_rank(n: usize, p: f64) -> usize {
    let rank = (p * n as f64).ceil() as usize;
    rank.clamp(1, n) - 1
}

fn check_bit_depth(bit_depth: u8) -> Result<()> {
    if !(1..=8).contains(&bit_depth) {
        return config_err(format!("bit depth must be in [1, 8], got {bit_depth}"));
    }
    Ok(())
}

/// Applies the exposure gain, clips at saturation and quantizes to `bit_depth` bits.
pub fn camera_capture(frame: &CameraFrame, gain: f64, bit_depth: u8) -> Result<CameraFrame> {
    check_bit_depth(bit_depth)?;
    if !(gain >= 0.0 && gain.is_finite()) {
        return config_err(format!("gain must be finite and non-negative, got {gain}"));
    }
    let levels = (1u32 << bit_depth) as f64;
    let sat = frame.saturation_level();
    let data = frame
        .intensities()
        .data()
        .iter()
        .map(|i| quantize(gain * i / sat, levels))
        .collect();
    let grid = RealGrid::new(frame.height(), frame.width(), data)?;
    Ok(CameraFrame { intensities: grid, bit_depth: Some(bit_depth), saturation_level: sat })
}

#[inline]
fn quantize(normalized: f64, levels: f64) -> f64 {
    (normalized.min(1.0 - SATURATION_EPSILON) * levels).floor()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffuser::{DiffuserConfig, DiffuserScreen};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn flat_config() -> OpticsConfig {
        OpticsConfig { beam_waist: f64::INFINITY, ..OpticsConfig::desk() }
    }

    fn random_field(h: usize, w: usize, seed: u64) -> FieldGrid {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        FieldGrid::from_fn(h, w, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn zero_sample_gives_unit_field_inside_modulator() {
        let cfg = flat_config();
        let sample = RealGrid::zeros(12, 12);
        let field = encode_sample_phase(&sample, &cfg).unwrap();
        let (top, left) = cfg.centered_origin(cfg.slm_height, cfg.slm_width);
        for r in 0..cfg.slm_height {
            for col in 0..cfg.slm_width {
                let v = field.get(top + r, left + col);
                assert!((v - c(1.0, 0.0)).norm() < 1e-15);
            }
        }
        assert_eq!(field.get(0, 0), c(0.0, 0.0));
    }

    #[test]
    fn half_range_value_maps_to_pi() {
        let cfg = flat_config();
        let mut pattern = RealGrid::zeros(cfg.slm_height, cfg.slm_width);
        pattern.set(10, 20, 128.0);
        let field = encode_slm_pattern(&pattern, &cfg).unwrap();
        let (top, left) = cfg.centered_origin(cfg.slm_height, cfg.slm_width);
        let v = field.get(top + 10, left + 20);
        assert!((v - c(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn phase_encoding_preserves_modulus() {
        let cfg = OpticsConfig::desk();
        let sample = RealGrid::from_fn(12, 12, |r, c| ((r * 31 + c * 17) % 256) as f64);
        let field = encode_sample_phase(&sample, &cfg).unwrap();
        let (top, left) = cfg.centered_origin(cfg.slm_height, cfg.slm_width);
        for r in 0..cfg.slm_height {
            for col in 0..cfg.slm_width {
                let got = field.get(top + r, left + col).norm();
                assert!((got - cfg.beam_amplitude(r, col)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn out_of_range_sample_is_rejected() {
        let sample = RealGrid::filled(4, 4, 300.0);
        assert!(matches!(encode_sample_phase(&sample, &OpticsConfig::desk()), Err(Error::Input(_))));
    }

    #[test]
    fn pattern_dimension_mismatch_is_config_error() {
        let cfg = OpticsConfig::desk();
        let pattern = RealGrid::zeros(3, 3);
        assert!(matches!(encode_slm_pattern(&pattern, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn identity_kernel_round_trip() {
        let field = random_field(32, 48, 1);
        let ones = FieldGrid::filled(32, 48, c(1.0, 0.0));
        let out = propagate_through_kernel(&field, &ones).unwrap();
        let err: f64 = out.values().iter().zip(field.values()).map(|(a, b)| (a - b).norm_sqr()).sum();
        assert!((err / field.energy()).sqrt() < 1e-10);
    }

    #[test]
    fn pure_phase_kernel_conserves_energy() {
        let field = random_field(64, 64, 2);
        let screen = DiffuserScreen::synth(&DiffuserConfig { footprint_size: 32, ..DiffuserConfig::desk(9) }).unwrap();
        let h = screen.transfer_at_step(crate::diffuser::AngularStep::new(17), 64).unwrap();
        let out = propagate_through_kernel(&field, &h).unwrap();
        assert!(((out.energy() - field.energy()) / field.energy()).abs() < 1e-9);
    }

    #[test]
    fn propagation_rejects_mismatched_kernel() {
        let field = random_field(8, 8, 3);
        let h = FieldGrid::filled(8, 4, c(1.0, 0.0));
        assert!(matches!(propagate_through_kernel(&field, &h), Err(Error::Input(_))));
    }

    #[test]
    fn propagation_is_linear_in_scalar() {
        let field = random_field(16, 16, 4);
        let h = FieldGrid::from_fn(16, 16, |r, col| Complex64::from_polar(1.0, (r * col) as f64 * 0.3));
        let alpha = c(0.7, -1.3);
        let a = propagate_through_kernel(&field.scale(alpha), &h).unwrap();
        let b = propagate_through_kernel(&field, &h).unwrap().scale(alpha);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn intensity_of_three_four_is_twenty_five() {
        let mut cfg = OpticsConfig::desk();
        cfg.camera_height = 1;
        cfg.camera_width = 1;
        let field = FieldGrid::filled(3, 3, c(3.0, 4.0));
        let frame = measure_intensity(&field, &cfg).unwrap();
        assert_eq!(frame.intensities().data(), &[25.0]);
        assert_eq!(frame.bit_depth(), None);
    }

    #[test]
    fn zero_field_gives_zero_frame_and_crop_is_bounded() {
        let cfg = OpticsConfig::desk();
        let zero = FieldGrid::zeros(128, 128);
        let frame = measure_intensity(&zero, &cfg).unwrap();
        assert!(frame.intensities().data().iter().all(|v| *v == 0.0));

        let field = random_field(128, 128, 5);
        let frame = measure_intensity(&field, &cfg).unwrap();
        let crop: f64 = frame.intensities().data().iter().sum();
        assert!(crop <= field.energy());
    }

    #[test]
    fn oversized_crop_is_config_error() {
        let cfg = OpticsConfig::desk();
        let field = FieldGrid::zeros(16, 16);
        assert!(matches!(measure_intensity(&field, &cfg), Err(Error::Config(_))));
    }

    fn frame_from(values: Vec<f64>, w: usize) -> CameraFrame {
        let h = values.len() / w;
        CameraFrame::new(RealGrid::new(h, w, values).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn calibration_maps_percentile_to_headroom() {
        // 100 pixels; the 99th value (nearest rank) is 10.
        let mut v: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        v[98] = 10.0;
        v[99] = 50.0;
        let g = calibrate_exposure(&[frame_from(v, 10)], 0.99).unwrap();
        assert!((g - 0.09).abs() < 1e-15);
    }

    #[test]
    fn calibration_is_inverse_homogeneous() {
        let v: Vec<f64> = (0..400).map(|i| ((i * 37) % 101) as f64 + 0.5).collect();
        let frame = frame_from(v, 20);
        let g = calibrate_exposure(std::slice::from_ref(&frame), 0.99).unwrap();
        let g3 = calibrate_exposure(&[frame.scaled(3.0).unwrap()], 0.99).unwrap();
        assert!((g3 * 3.0 - g).abs() < 1e-12 * g);
    }

    #[test]
    fn calibration_leaves_at_most_one_percent_above_headroom() {
        let frames: Vec<CameraFrame> = (0..5)
            .map(|s| {
                let f = random_field(40, 40, 100 + s);
                frame_from(f.values().iter().map(|v| v.norm_sqr()).collect(), 40)
            })
            .collect();
        let g = calibrate_exposure(&frames, 0.99).unwrap();
        let total: usize = frames.iter().map(|f| f.intensities().data().len()).sum();
        let above = frames
            .iter()
            .flat_map(|f| f.intensities().data())
            .filter(|i| g * **i > CALIBRATION_HEADROOM)
            .count();
        assert!(above as f64 <= 0.01 * total as f64, "{above} of {total}");
    }

    #[test]
    fn all_zero_batch_fails_calibration() {
        let frame = frame_from(vec![0.0; 16], 4);
        assert!(matches!(calibrate_exposure(&[frame], 0.99), Err(Error::Calibration(_))));
        assert!(matches!(calibrate_exposure(&[], 0.99), Err(Error::Calibration(_))));
    }

    #[test]
    fn capture_codes() {
        let frame = frame_from(vec![1.0, 2.0, 0.0, 0.5], 2);
        let one_bit = camera_capture(&frame, 1.0, 1).unwrap();
        assert_eq!(one_bit.intensities().data(), &[1.0, 1.0, 0.0, 1.0]);
        let eight = camera_capture(&frame, 1.0, 8).unwrap();
        assert_eq!(eight.intensities().data(), &[255.0, 255.0, 0.0, 128.0]);
        assert_eq!(eight.bit_depth(), Some(8));
        let dark = camera_capture(&frame, 0.0, 8).unwrap();
        assert!(dark.intensities().data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn capture_rejects_bad_bit_depth() {
        let frame = frame_from(vec![1.0; 4], 2);
        assert!(matches!(camera_capture(&frame, 1.0, 0), Err(Error::Config(_))));
        assert!(matches!(camera_capture(&frame, 1.0, 9), Err(Error::Config(_))));
    }

    #[test]
    fn config_validation() {
        assert!(OpticsConfig::default().validate().is_ok());
        assert!(OpticsConfig::desk().validate().is_ok());
        let bad = OpticsConfig { pad_size: 512, ..OpticsConfig::default() };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }

    proptest::proptest! {
        #[test]
        fn capture_is_monotone(a in 0.0f64..3.0, b in 0.0f64..3.0, gain in 0.01f64..4.0, bits in 1u8..=8) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let frame = frame_from(vec![lo, hi], 2);
            let q = camera_capture(&frame, gain, bits).unwrap();
            let d = q.intensities().data();
            proptest::prop_assert!(d[0] <= d[1]);
            proptest::prop_assert!(d[1] <= ((1u32 << bits) - 1) as f64);
        }
    }
}
