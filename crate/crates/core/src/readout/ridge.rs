use nalgebra::DMatrix;

use super::{FeatureMatrix, LabelVector};
use crate::error::{input_err, Error, Result};

/// Rows per block when accumulating the Gram matrix.
const GRAM_CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeOptions {
    pub alpha: f64,
    /// Append an all-ones column for an intercept.
    pub fit_bias: bool,
    /// Include the intercept in the penalty (strict textbook objective).
    pub penalize_bias: bool,
}

impl Default for RidgeOptions {
    fn default() -> Self {
        Self { alpha: 1.0, fit_bias: true, penalize_bias: false }
    }
}

/// One-vs-rest linear readout. `weights` is `(d + bias) x C` row-major, bias row last.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    weights: Vec<f64>,
    features: usize,
    classes: usize,
    options: RidgeOptions,
}

impl RidgeModel {
    pub fn from_weights(weights: Vec<f64>, features: usize, classes: usize, options: RidgeOptions) -> Result<Self> {
        let rows = features + options.fit_bias as usize;
        if weights.len() != rows * classes {
            return input_err(format!("expected {}x{classes} weights, got {}", rows, weights.len()));
        }
        Ok(Self { weights, features, classes, options })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn feature_count(&self) -> usize {
        self.features
    }

    pub fn class_count(&self) -> usize {
        self.classes
    }

    pub fn alpha(&self) -> f64 {
        self.options.alpha
    }

    pub fn options(&self) -> RidgeOptions {
        self.options
    }

    /// Trainable parameters per output column (features plus intercept).
    pub fn parameters_per_class(&self) -> usize {
        self.features + self.options.fit_bias as usize
    }

    pub fn weight(&self, row: usize, class: usize) -> f64 {
        self.weights[row * self.classes + class]
    }

    /// Raw output scores, `n x C` row-major.
    pub fn scores(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.cols() != self.features {
            return input_err(format!("model expects {} features, got {}", self.features, x.cols()));
        }
        let c = self.classes;
        let mut out = vec![0.0; x.rows() * c];
        for i in 0..x.rows() {
            let s = &mut out[i * c..(i + 1) * c];
            if self.options.fit_bias {
                s.copy_from_slice(&self.weights[self.features * c..]);
            }
            for (j, xv) in x.row(i).iter().enumerate() {
                if *xv == 0.0 {
                    continue;
                }
                for (sk, wk) in s.iter_mut().zip(&self.weights[j * c..(j + 1) * c]) {
                    *sk += xv * wk;
                }
            }
        }
        Ok(out)
    }
}

/// Closed-form ridge with one-hot targets and an unpenalized intercept.
pub fn ridge_fit(x: &FeatureMatrix, y: &LabelVector, alpha: f64) -> Result<RidgeModel> {
    ridge_fit_with(x, y, RidgeOptions { alpha, ..RidgeOptions::default() })
}

/// Solves `(X'X + aI) W = X'Y` by Cholesky, `X` optionally augmented with a ones column.
pub fn ridge_fit_with(x: &FeatureMatrix, y: &LabelVector, options: RidgeOptions) -> Result<RidgeModel> {
    if !(options.alpha > 0.0 && options.alpha.is_finite()) {
        return input_err(format!("alpha must be positive, got {}", options.alpha));
    }
    if x.rows() != y.len() {
        return input_err(format!("{} feature rows but {} labels", x.rows(), y.len()));
    }
    let d = x.cols();
    let dim = d + options.fit_bias as usize;
    let classes = y.class_count();

    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    for start in (0..x.rows()).step_by(GRAM_CHUNK) {
        let end = (start + GRAM_CHUNK).min(x.rows());
        let block = DMatrix::from_fn(end - start, dim, |i, j| {
            if j < d {
                x.row(start + i)[j]
            } else {
                1.0
            }
        });
        gram += block.transpose() * &block;
    }
    let mut rhs = DMatrix::<f64>::zeros(dim, classes);
    for i in 0..x.rows() {
        let label = y.get(i);
        for (j, v) in x.row(i).iter().enumerate() {
            rhs[(j, label)] += v;
        }
        if options.fit_bias {
            rhs[(d, label)] += 1.0;
        }
    }
    let penalized = if options.fit_bias && !options.penalize_bias { d } else { dim };
    for j in 0..penalized {
        gram[(j, j)] += options.alpha;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Internal("ridge normal equations are not positive definite".into()))?;
    let w = chol.solve(&rhs);
    let mut weights = Vec::with_capacity(dim * classes);
    for r in 0..dim {
        for c in 0..classes {
            weights.push(w[(r, c)]);
        }
    }
    if weights.iter().any(|v| !v.is_finite()) {
        return Err(Error::Internal("ridge solution is not finite".into()));
    }
    RidgeModel::from_weights(weights, d, classes, options)
}

/// Argmax of the output scores; ties go to the lower class index.
pub fn ridge_predict(model: &RidgeModel, x: &FeatureMatrix) -> Result<LabelVector> {
    let scores = model.scores(x)?;
    let c = model.class_count();
    let labels = scores
        .chunks(c)
        .map(|row| {
            let mut best = 0;
            for k in 1..c {
                if row[k] > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    LabelVector::new(labels, c)
}

/// `|Y - XW|^2 + alpha |W|^2` with the same bias conventions as the fit.
pub fn ridge_objective(model: &RidgeModel, x: &FeatureMatrix, y: &LabelVector) -> Result<f64> {
    let scores = model.scores(x)?;
    let c = model.class_count();
    let mut loss = 0.0;
    for (i, row) in scores.chunks(c).enumerate() {
        for (k, s) in row.iter().enumerate() {
            let target = if y.get(i) == k { 1.0 } else { 0.0 };
            loss += (target - s).powi(2);
        }
    }
    let opts = model.options();
    let penalized_rows = if opts.fit_bias && !opts.penalize_bias { model.feature_count() } else { model.parameters_per_class() };
    let penalty: f64 = model.weights()[..penalized_rows * c].iter().map(|w| w * w).sum();
    Ok(loss + opts.alpha * penalty)
}
