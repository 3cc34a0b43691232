//! Digital readout: pooling, flattening, ridge classification, metrics and
//! the analysis projections (SSIM, LDA).

mod lda;
mod metrics;
mod pool;
mod ridge;
mod ssim;

pub use lda::{lda_project, separability_score, LdaProjection};
pub use metrics::{accuracy, confusion_matrix_rownorm, ConfusionMatrix};
pub use pool::{flatten, pool_average, reshape};
pub use ridge::{ridge_fit, ridge_fit_with, ridge_objective, ridge_predict, RidgeModel, RidgeOptions};
pub use ssim::{ssim, ssim_grids, SSIM_SIGMA, SSIM_WINDOW};

use crate::error::{input_err, Result};

/// `n x d` row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return input_err(format!("feature matrix must be non-empty, got {rows}x{cols}"));
        }
        if data.len() != rows * cols {
            return input_err(format!("{rows}x{cols} features need {} values, got {}", rows * cols, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return input_err("feature matrix contains non-finite values");
        }
        Ok(Self { rows, cols, data })
    }

    /// Stacks equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return input_err("no feature rows");
        };
        let cols = first.len();
        if rows.iter().any(|r| r.len() != cols) {
            return input_err("feature rows have different lengths");
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Rows picked by index, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return input_err(format!("row {i} out of range for {} rows", self.rows));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.cols, data)
    }
}

/// Integer class labels in `[0, class_count)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    class_count: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if class_count == 0 {
            return input_err("class count must be at least 1");
        }
        if let Some(bad) = labels.iter().find(|l| **l >= class_count) {
            return input_err(format!("label {bad} out of range for {class_count} classes"));
        }
        Ok(Self { labels, class_count })
    }

    /// Class count inferred as `max label + 1`.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let classes = labels.iter().max().map_or(1, |m| m + 1);
        Self::new(labels, classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn get(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self { labels: indices.iter().map(|&i| self.labels[i]).collect(), class_count: self.class_count }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}
