//! Dataset containers, loaders, subsets and splits.

mod idx;
mod image_dir;
mod prepare;
mod sampling;
mod synth;

use std::sync::Arc;

pub use idx::{load_idx, load_idx_split, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels};
pub use image_dir::{load_image_dir, luma};
pub use prepare::{bilinear_upsample, prepare_for_slm, upsampling_factor};
pub use sampling::{split, stratified_subset, Split};
pub use synth::{synth_blobs, SynthConfig};

use crate::error::{input_err, Result};
use crate::grid::RealGrid;
use crate::readout::LabelVector;

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return input_err("image must be non-empty");
        }
        if pixels.len() != height * width {
            return input_err(format!("{} pixels for a {height}x{width} image", pixels.len()));
        }
        Ok(Self { height, width, pixels })
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

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn to_real(&self) -> RealGrid {
        RealGrid::from_fn(self.height, self.width, |r, c| self.get(r, c) as f64)
    }
}

/// Train/test index sets shipped with a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeclaredSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Labelled images. Images are shared, so subsets keep references to the originals.
#[derive(Debug, Clone)]
pub struct Dataset {
    name: String,
    images: Vec<Arc<GrayImage>>,
    labels: LabelVector,
    declared_split: Option<DeclaredSplit>,
    origin: Vec<usize>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, images: Vec<GrayImage>, labels: LabelVector) -> Result<Self> {
        Self::from_shared(name, images.into_iter().map(Arc::new).collect(), labels)
    }

    pub fn from_shared(name: impl Into<String>, images: Vec<Arc<GrayImage>>, labels: LabelVector) -> Result<Self> {
        if images.len() != labels.len() {
            return input_err(format!("{} images but {} labels", images.len(), labels.len()));
        }
        let origin = (0..images.len()).collect();
        Ok(Self { name: name.into(), images, labels, declared_split: None, origin })
    }

    /// Attaches an official split; the two sets must partition the indices.
    pub fn with_declared_split(mut self, split: DeclaredSplit) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        for &i in split.train.iter().chain(&split.test) {
            if i >= self.len() || seen[i] {
                return input_err(format!("declared split index {i} is out of range or repeated"));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return input_err("declared split does not cover every sample");
        }
        self.declared_split = Some(split);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image(&self, i: usize) -> &GrayImage {
        &self.images[i]
    }

    pub fn shared_image(&self, i: usize) -> &Arc<GrayImage> {
        &self.images[i]
    }

    pub fn images(&self) -> impl Iterator<Item = &GrayImage> {
        self.images.iter().map(|i| i.as_ref())
    }

    pub fn labels(&self) -> &LabelVector {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.labels.class_count()
    }

    pub fn declared_split(&self) -> Option<&DeclaredSplit> {
        self.declared_split.as_ref()
    }

    /// Index of each sample in the dataset this one was drawn from.
    pub fn origin(&self) -> &[usize] {
        &self.origin
    }

    /// Samples at `indices`, in that order; drops any declared split.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            images: indices.iter().map(|&i| Arc::clone(&self.images[i])).collect(),
            labels: self.labels.select(indices),
            declared_split: None,
            origin: indices.iter().map(|&i| self.origin[i]).collect(),
        }
    }

    /// Raw pixels as a feature matrix; all images must share one size.
    pub fn pixel_features(&self) -> Result<crate::readout::FeatureMatrix> {
        let Some(first) = self.images.first() else {
            return input_err("empty dataset");
        };
        let dims = first.dims();
        let mut data = Vec::with_capacity(self.len() * dims.0 * dims.1);
        for img in &self.images {
            if img.dims() != dims {
                return input_err("raw pixel features need images of one size");
            }
            data.extend(img.pixels().iter().map(|&p| p as f64));
        }
        crate::readout::FeatureMatrix::new(self.len(), dims.0 * dims.1, data)
    }
}
