//! The full optical feature path and the accuracy it yields at a disk step.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Split};
use crate::diffuser::{AngularStep, DiffuserConfig, DiffuserScreen, STEPS_PER_REVOLUTION};
use crate::error::{config_err, input_err, Result};
use crate::evolve::Fitness;
use crate::grid::RealGrid;
use crate::optics::{
    calibrate_exposure, camera_capture, encode_sample_phase, filter_spectrum, measure_intensity, spectrum_of,
    CameraFrame, FieldGrid, Fft2, OpticsConfig,
};
use crate::readout::{
    accuracy, confusion_matrix_rownorm, flatten, pool_average, ridge_fit_with, ridge_predict, ConfusionMatrix,
    FeatureMatrix, LabelVector, RidgeOptions,
};

/// Spectra are precomputed when they fit in this many bytes.
pub const SPECTRUM_CACHE_LIMIT: usize = 1 << 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReadoutConfig {
    pub pool_height: usize,
    pub pool_width: usize,
    pub alpha: f64,
    pub bit_depth: u8,
    /// Penalize the intercept as well (strict ridge objective).
    pub penalize_bias: bool,
    pub train_fraction: f64,
    pub calibration_percentile: f64,
    /// Training samples used for exposure calibration.
    pub calibration_samples: usize,
    /// Evenly spaced disk steps used for exposure calibration.
    pub calibration_steps: usize,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        Self {
            pool_height: 20,
            pool_width: 16,
            alpha: 1.0,
            bit_depth: 8,
            penalize_bias: false,
            train_fraction: 0.8,
            calibration_percentile: 0.99,
            calibration_samples: 64,
            calibration_steps: 8,
        }
    }
}

impl ReadoutConfig {
    /// Pooling matched to [`OpticsConfig::desk`]: 48x64 camera to 12x16 features.
    pub fn desk() -> Self {
        Self { pool_height: 4, pool_width: 4, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pool_height == 0 || self.pool_width == 0 {
            return config_err("pool size must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return config_err("alpha must be positive");
        }
        if !(1..=8).contains(&self.bit_depth) {
            return config_err(format!("bit depth must be in [1, 8], got {}", self.bit_depth));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return config_err("train_fraction must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.calibration_percentile) {
            return config_err("calibration_percentile must lie in [0, 1]");
        }
        if self.calibration_samples == 0 || self.calibration_steps == 0 {
            return config_err("calibration needs at least one sample and one step");
        }
        Ok(())
    }

    pub fn ridge_options(&self) -> RidgeOptions {
        RidgeOptions { alpha: self.alpha, fit_bias: true, penalize_bias: self.penalize_bias }
    }
}

/// Test-split outcome of one readout fit.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub accuracy: f64,
    pub predictions: LabelVector,
    pub truth: LabelVector,
    pub confusion: ConfusionMatrix,
}

enum Source {
    Spectra(Vec<Vec<Complex64>>),
    Images(Vec<RealGrid>),
}

/// Dataset, optics and readout bound together with a frozen exposure gain.
pub struct OpticalPipeline {
    optics: OpticsConfig,
    readout: ReadoutConfig,
    screen: DiffuserScreen,
    fft: Fft2,
    source: Source,
    labels: LabelVector,
    split: Split,
    gain: f64,
    propagations: AtomicU64,
    cache: Mutex<BTreeMap<AngularStep, f64>>,
}

impl std::fmt::Debug for OpticalPipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OpticalPipeline")
            .field("samples", &self.len())
            .field("gain", &self.gain)
            .field("readout", &self.readout)
            .finish()
    }
}

impl OpticalPipeline {
    /// Builds the pipeline; with `gain = None` the exposure is calibrated here, once.
    pub fn new(
        dataset: &Dataset,
        optics: &OpticsConfig,
        diffuser: &DiffuserConfig,
        readout: &ReadoutConfig,
        split: Split,
        gain: Option<f64>,
    ) -> Result<Self> {
        optics.validate()?;
        readout.validate()?;
        if dataset.is_empty() {
            return input_err("empty dataset");
        }
        if optics.camera_height % readout.pool_height != 0 || optics.camera_width % readout.pool_width != 0 {
            return config_err(format!(
                "camera {}x{} is not divisible into {}x{} pools",
                optics.camera_height, optics.camera_width, readout.pool_height, readout.pool_width
            ));
        }
        if split.train.is_empty() || split.test.is_empty() {
            return input_err("train and test splits must both be non-empty");
        }
        if split.train.iter().chain(&split.test).any(|&i| i >= dataset.len()) {
            return input_err("split index out of range");
        }
        let screen = DiffuserScreen::synth(diffuser)?;
        let n = optics.pad_size;
        let fft = Fft2::new(n, n);
        let images: Vec<RealGrid> = dataset.images().map(|i| i.to_real()).collect();
        let bytes = dataset.len() * n * n * std::mem::size_of::<Complex64>();
        let source = if bytes <= SPECTRUM_CACHE_LIMIT {
            let spectra = images
                .par_iter()
                .map(|img| spectrum_of(&fft, &encode_sample_phase(img, optics)?))
                .collect::<Result<Vec<_>>>()?;
            Source::Spectra(spectra)
        } else {
            for img in &images {
                crate::data::prepare_for_slm(img, optics)?;
            }
            Source::Images(images)
        };
        let mut pipeline = Self {
            optics: optics.clone(),
            readout: readout.clone(),
            screen,
            fft,
            source,
            labels: dataset.labels().clone(),
            split,
            gain: 0.0,
            propagations: AtomicU64::new(0),
            cache: Mutex::new(BTreeMap::new()),
        };
        pipeline.gain = match gain {
            Some(g) if g > 0.0 && g.is_finite() => g,
            Some(g) => return config_err(format!("gain must be positive, got {g}")),
            None => pipeline.calibrate()?,
        };
        Ok(pipeline)
    }

    fn calibrate(&self) -> Result<f64> {
        let count = self.readout.calibration_samples.min(self.split.train.len());
        let stride = STEPS_PER_REVOLUTION as usize / self.readout.calibration_steps;
        let mut frames = Vec::with_capacity(count * self.readout.calibration_steps);
        for k in 0..self.readout.calibration_steps {
            let transfer = self.screen.transfer_at_step(AngularStep::new((k * stride) as i64), self.optics.pad_size)?;
            let batch = self.split.train[..count]
                .par_iter()
                .map(|&i| self.intensity(i, &transfer))
                .collect::<Result<Vec<_>>>()?;
            frames.extend(batch);
        }
        let gain = calibrate_exposure(&frames, self.readout.calibration_percentile)?;
        self.propagations.store(0, Ordering::SeqCst);
        Ok(gain)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn labels(&self) -> &LabelVector {
        &self.labels
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    pub fn screen(&self) -> &DiffuserScreen {
        &self.screen
    }

    pub fn optics(&self) -> &OpticsConfig {
        &self.optics
    }

    pub fn readout(&self) -> &ReadoutConfig {
        &self.readout
    }

    /// Optical propagations performed since construction (calibration excluded).
    pub fn propagations(&self) -> u64 {
        self.propagations.load(Ordering::SeqCst)
    }

    /// Changes bit depth or pooling, keeping the frozen gain and the cached spectra.
    pub fn set_readout(&mut self, readout: &ReadoutConfig) -> Result<()> {
        readout.validate()?;
        if self.optics.camera_height % readout.pool_height != 0 || self.optics.camera_width % readout.pool_width != 0 {
            return config_err("camera is not divisible into the requested pools");
        }
        self.readout = readout.clone();
        self.cache.lock().expect("fitness cache poisoned").clear();
        Ok(())
    }

    pub fn transfer(&self, step: AngularStep) -> Result<FieldGrid> {
        self.screen.transfer_at_step(step, self.optics.pad_size)
    }

    fn intensity(&self, sample: usize, transfer: &FieldGrid) -> Result<CameraFrame> {
        let field = match &self.source {
            Source::Spectra(s) => filter_spectrum(&self.fft, &s[sample], transfer),
            Source::Images(imgs) => {
                let spectrum = spectrum_of(&self.fft, &encode_sample_phase(&imgs[sample], &self.optics)?)?;
                filter_spectrum(&self.fft, &spectrum, transfer)
            }
        };
        self.propagations.fetch_add(1, Ordering::Relaxed);
        measure_intensity(&field, &self.optics)
    }

    /// Unquantized camera intensity for one sample.
    pub fn raw_frame(&self, sample: usize, step: AngularStep) -> Result<CameraFrame> {
        self.intensity(sample, &self.transfer(step)?)
    }

    /// Quantized capture for one sample at the configured bit depth.
    pub fn capture(&self, sample: usize, step: AngularStep) -> Result<CameraFrame> {
        camera_capture(&self.raw_frame(sample, step)?, self.gain, self.readout.bit_depth)
    }

    /// Pooled, flattened captures of every sample, in dataset order.
    pub fn features_at(&self, step: AngularStep) -> Result<FeatureMatrix> {
        let transfer = self.transfer(step)?;
        let (ph, pw) = (self.readout.pool_height, self.readout.pool_width);
        let rows = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let frame = camera_capture(&self.intensity(i, &transfer)?, self.gain, self.readout.bit_depth)?;
                Ok(flatten(&pool_average(frame.intensities(), ph, pw)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let cols = rows[0].len();
        FeatureMatrix::new(rows.len(), cols, rows.concat())
    }

    /// Fits the readout on the train split and scores the test split.
    pub fn evaluate_features(&self, features: &FeatureMatrix) -> Result<Evaluation> {
        let x_train = features.select_rows(&self.split.train)?;
        let y_train = self.labels.select(&self.split.train);
        let x_test = features.select_rows(&self.split.test)?;
        let truth = self.labels.select(&self.split.test);
        let model = ridge_fit_with(&x_train, &y_train, self.readout.ridge_options())?;
        let predictions = ridge_predict(&model, &x_test)?;
        let acc = accuracy(&predictions, &truth)?;
        let confusion = confusion_matrix_rownorm(&predictions, &truth, self.labels.class_count())?;
        Ok(Evaluation { accuracy: acc, predictions, truth, confusion })
    }

    pub fn evaluate(&self, step: AngularStep) -> Result<Evaluation> {
        let eval = self.evaluate_features(&self.features_at(step)?)?;
        self.cache.lock().expect("fitness cache poisoned").insert(step, eval.accuracy);
        Ok(eval)
    }

    /// Test accuracy at `step`, served from the cache after the first call.
    pub fn fitness(&self, step: AngularStep) -> Result<f64> {
        if let Some(&hit) = self.cache.lock().expect("fitness cache poisoned").get(&step) {
            return Ok(hit);
        }
        Ok(self.evaluate(step)?.accuracy)
    }
}

impl Fitness for OpticalPipeline {
    fn evaluate(&self, step: AngularStep) -> Result<f64> {
        self.fitness(step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{split, synth_blobs, SynthConfig};

    fn small() -> (Dataset, OpticsConfig, DiffuserConfig, ReadoutConfig) {
        let ds = synth_blobs(&SynthConfig { per_class: 10, ..SynthConfig::default() }).unwrap();
        let optics = OpticsConfig { slm_height: 24, slm_width: 32, pad_size: 64, camera_height: 24, camera_width: 32, beam_waist: 11.0, ..OpticsConfig::default() };
        let diffuser = DiffuserConfig { footprint_size: 16, annulus_radius: 160.0, ..DiffuserConfig::desk(1) };
        (ds, optics, diffuser, ReadoutConfig::desk())
    }

    #[test]
    fn cache_avoids_repeat_propagation() {
        let (ds, o, d, r) = small();
        let s = split(&ds, 0.8, 0).unwrap();
        let p = OpticalPipeline::new(&ds, &o, &d, &r, s, None).unwrap();
        assert_eq!(p.propagations(), 0);
        let a = p.fitness(AngularStep::new(5)).unwrap();
        assert_eq!(p.propagations(), ds.len() as u64);
        let b = p.fitness(AngularStep::new(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(p.propagations(), ds.len() as u64);
    }

    #[test]
    fn single_class_scores_100() {
        let (ds, o, d, r) = small();
        let zeros: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels().get(i) == 0).collect();
        let one = ds.select(&zeros);
        let one = crate::data::Dataset::from_shared(
            "one",
            (0..one.len()).map(|i| one.shared_image(i).clone()).collect(),
            LabelVector::new(vec![0; one.len()], 1).unwrap(),
        )
        .unwrap();
        let s = split(&one, 0.8, 0).unwrap();
        let p = OpticalPipeline::new(&one, &o, &d, &r, s, None).unwrap();
        assert_eq!(p.fitness(AngularStep::new(77)).unwrap(), 100.0);
    }

    #[test]
    fn features_have_pooled_width_and_integer_means() {
        let (ds, o, d, r) = small();
        let s = split(&ds, 0.8, 0).unwrap();
        let p = OpticalPipeline::new(&ds, &o, &d, &r, s, None).unwrap();
        let f = p.features_at(AngularStep::new(0)).unwrap();
        assert_eq!((f.rows(), f.cols()), (20, 6 * 8));
        assert!(f.data().iter().all(|v| (v * 16.0).fract() == 0.0 && *v <= 255.0));
    }

    #[test]
    fn frozen_gain_is_reused() {
        let (ds, o, d, r) = small();
        let s = split(&ds, 0.8, 0).unwrap();
        let p = OpticalPipeline::new(&ds, &o, &d, &r, s.clone(), Some(2.5)).unwrap();
        assert_eq!(p.gain(), 2.5);
        assert!(OpticalPipeline::new(&ds, &o, &d, &r, s, Some(0.0)).is_err());
    }
}
