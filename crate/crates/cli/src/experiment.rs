//! Dataset loading and the working set a run operates on.

use anyhow::{Context, Result};
use ornn_core::data::{load_idx, load_idx_split, load_image_dir, split, stratified_subset, synth_blobs};
use ornn_core::readout::{accuracy, confusion_matrix_rownorm, ridge_fit_with, ridge_predict};
use ornn_core::{Dataset, Evaluation, FeatureMatrix, LabelVector, OpticalPipeline, ReadoutConfig, Split};

use crate::config::{DatasetSpec, ExperimentConfig};

pub fn load_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    let ds = match spec {
        DatasetSpec::Synthetic(s) => synth_blobs(s)?,
        DatasetSpec::Idx { images, labels, test_images: None, test_labels: None } => load_idx(images, labels)
            .with_context(|| format!("loading {} / {}", images.display(), labels.display()))?,
        DatasetSpec::Idx { images, labels, test_images: Some(ti), test_labels: Some(tl) } => {
            load_idx_split("idx", images, labels, ti, tl).context("loading IDX train and test files")?
        }
        DatasetSpec::Idx { .. } => anyhow::bail!("test_images and test_labels must be given together"),
        DatasetSpec::ImageDir { root, manifest } => {
            load_image_dir(root, manifest).with_context(|| format!("loading images listed in {}", manifest.display()))?
        }
    };
    Ok(ds)
}

/// The samples a run works on, with their train/test split.
#[derive(Debug, Clone)]
pub struct WorkingSet {
    pub dataset: Dataset,
    pub split: Split,
}

impl WorkingSet {
    /// Loads the dataset, applies the configured subset when `use_subset`, and splits it.
    pub fn prepare(cfg: &ExperimentConfig, use_subset: bool) -> Result<Self> {
        let full = load_dataset(&cfg.dataset)?;
        Self::from_dataset(cfg, full, use_subset)
    }

    pub fn from_dataset(cfg: &ExperimentConfig, full: Dataset, use_subset: bool) -> Result<Self> {
        let dataset = if use_subset && cfg.subset > 0 {
            stratified_subset(&full, cfg.subset, cfg.seeds.subset)?
        } else {
            full
        };
        let split = split(&dataset, cfg.readout.train_fraction, cfg.seeds.split)?;
        Ok(Self { dataset, split })
    }

    /// Optical pipeline over this set; `gain = None` calibrates exposure once.
    pub fn pipeline(&self, cfg: &ExperimentConfig, readout: &ReadoutConfig, gain: Option<f64>) -> Result<OpticalPipeline> {
        Ok(OpticalPipeline::new(&self.dataset, &cfg.optics, &cfg.diffuser, readout, self.split.clone(), gain)?)
    }
}

/// Ridge fit on the train rows of `x`, scored on the test rows.
pub fn evaluate_split(x: &FeatureMatrix, labels: &LabelVector, split: &Split, readout: &ReadoutConfig) -> Result<Evaluation> {
    let model = ridge_fit_with(&x.select_rows(&split.train)?, &labels.select(&split.train), readout.ridge_options())?;
    let truth = labels.select(&split.test);
    let predictions = ridge_predict(&model, &x.select_rows(&split.test)?)?;
    let acc = accuracy(&predictions, &truth)?;
    let confusion = confusion_matrix_rownorm(&predictions, &truth, labels.class_count())?;
    Ok(Evaluation { accuracy: acc, predictions, truth, confusion })
}
