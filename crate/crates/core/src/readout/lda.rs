use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{FeatureMatrix, LabelVector};
use crate::error::{input_err, Error, Result};

/// Relative ridge added to the within-class scatter: `lambda = 1e-6 * tr(S_W) / d`.
const WITHIN_SCATTER_RIDGE: f64 = 1e-6;

/// Fitted discriminant directions (`d x k`, column per component).
#[derive(Debug, Clone)]
pub struct LdaProjection {
    directions: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl LdaProjection {
    /// Fits the top-`k` generalized eigenvectors of `(S_W + lambda I)^-1 S_B`.
    pub fn fit(x: &FeatureMatrix, y: &LabelVector, k: usize) -> Result<Self> {
        let (n, d) = (x.rows(), x.cols());
        let classes = y.class_count();
        if n != y.len() {
            return input_err(format!("{n} feature rows but {} labels", y.len()));
        }
        if classes < 2 {
            return input_err("discriminant analysis needs at least two classes");
        }
        if k == 0 || k > d.min(classes - 1) {
            return input_err(format!("k = {k} exceeds min(d, C - 1) = {}", d.min(classes - 1)));
        }
        let counts = y.class_counts();
        let mut means = DMatrix::<f64>::zeros(classes, d);
        for i in 0..n {
            let c = y.get(i);
            for (j, v) in x.row(i).iter().enumerate() {
                means[(c, j)] += v;
            }
        }
        for c in 0..classes {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                means.row_mut(c).scale_mut(inv);
            }
        }
        let overall = DVector::from_fn(d, |j, _| x.data().iter().skip(j).step_by(d).sum::<f64>() / n as f64);

        let centered = DMatrix::from_fn(n, d, |i, j| x.row(i)[j] - means[(y.get(i), j)]);
        let mut within = centered.transpose() * &centered;
        let mut between = DMatrix::<f64>::zeros(d, d);
        for c in 0..classes {
            if counts[c] == 0 {
                continue;
            }
            let diff = DVector::from_fn(d, |j, _| means[(c, j)] - overall[j]);
            between += (counts[c] as f64) * &diff * diff.transpose();
        }
        let lambda = WITHIN_SCATTER_RIDGE * within.trace() / d as f64;
        let lambda = if lambda > 0.0 { lambda } else { WITHIN_SCATTER_RIDGE };
        for j in 0..d {
            within[(j, j)] += lambda;
        }

        // Whiten with the Cholesky factor: M = L^-1 S_B L^-T, v = L^-T u.
        let chol = within
            .cholesky()
            .ok_or_else(|| Error::Internal("regularized within-class scatter is not positive definite".into()))?;
        let l = chol.l();
        let tmp = l
            .solve_lower_triangular(&between)
            .ok_or_else(|| Error::Internal("triangular solve failed".into()))?;
        let m = l
            .solve_lower_triangular(&tmp.transpose())
            .ok_or_else(|| Error::Internal("triangular solve failed".into()))?;
        let m = (&m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let lt = l.transpose();
        let mut directions = DMatrix::<f64>::zeros(d, k);
        let mut eigenvalues = Vec::with_capacity(k);
        for (slot, &idx) in order.iter().take(k).enumerate() {
            let u = eig.eigenvectors.column(idx).into_owned();
            let v = lt
                .solve_upper_triangular(&u)
                .ok_or_else(|| Error::Internal("triangular solve failed".into()))?;
            directions.set_column(slot, &v);
            eigenvalues.push(eig.eigenvalues[idx]);
        }
        Ok(Self { directions, eigenvalues })
    }

    pub fn components(&self) -> usize {
        self.directions.ncols()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Projects rows of `x`, returning an `n x k` matrix.
    pub fn transform(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        if x.cols() != self.directions.nrows() {
            return input_err("feature count does not match the fitted projection");
        }
        let k = self.components();
        let mut out = Vec::with_capacity(x.rows() * k);
        for i in 0..x.rows() {
            let row = x.row(i);
            for c in 0..k {
                out.push(self.directions.column(c).iter().zip(row).map(|(a, b)| a * b).sum());
            }
        }
        FeatureMatrix::new(x.rows(), k, out)
    }
}

/// Projects onto the top-`k` discriminant components.
pub fn lda_project(x: &FeatureMatrix, y: &LabelVector, k: usize) -> Result<FeatureMatrix> {
    LdaProjection::fit(x, y, k)?.transform(x)
}

/// Mean distance between class centroids over mean distance of samples to their centroid.
pub fn separability_score(z: &FeatureMatrix, y: &LabelVector) -> Result<f64> {
    if z.rows() != y.len() {
        return input_err("projection rows and labels differ in length");
    }
    let k = z.cols();
    let counts = y.class_counts();
    let mut centroids = vec![vec![0.0; k]; y.class_count()];
    for i in 0..z.rows() {
        for (c, v) in centroids[y.get(i)].iter_mut().zip(z.row(i)) {
            *c += v;
        }
    }
    for (c, n) in centroids.iter_mut().zip(&counts) {
        if *n > 0 {
            c.iter_mut().for_each(|v| *v /= *n as f64);
        }
    }
    let present: Vec<usize> = (0..y.class_count()).filter(|&c| counts[c] > 0).collect();
    if present.len() < 2 {
        return input_err("separability needs at least two populated classes");
    }
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let mut between = 0.0;
    let mut pairs = 0usize;
    for (a, &ca) in present.iter().enumerate() {
        for &cb in &present[a + 1..] {
            between += dist(&centroids[ca], &centroids[cb]);
            pairs += 1;
        }
    }
    between /= pairs as f64;
    let mut spread = vec![0.0; y.class_count()];
    for i in 0..z.rows() {
        spread[y.get(i)] += dist(z.row(i), &centroids[y.get(i)]);
    }
    let within = present.iter().map(|&c| spread[c] / counts[c] as f64).sum::<f64>() / present.len() as f64;
    if within == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(between / within)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_point_clusters() {
        let x = FeatureMatrix::new(6, 1, vec![-1.0, -1.0, -1.0, 1.0, 1.0, 1.0]).unwrap();
        let y = LabelVector::new(vec![0, 0, 0, 1, 1, 1], 2).unwrap();
        let z = lda_project(&x, &y, 1).unwrap();
        let (lo, hi) = (z.row(0)[0], z.row(3)[0]);
        assert!((lo - hi).abs() > 0.0);
        assert!(z.data()[..3].iter().all(|v| *v == lo));
    }

    #[test]
    fn k_is_bounded_by_class_count() {
        let x = FeatureMatrix::new(4, 3, (0..12).map(|v| v as f64).collect()).unwrap();
        let y = LabelVector::new(vec![0, 1, 0, 1], 2).unwrap();
        assert!(matches!(lda_project(&x, &y, 2), Err(Error::Input(_))));
    }

    #[test]
    fn ten_classes_allow_three_components() {
        let n = 200;
        let d = 12;
        let x = FeatureMatrix::new(n, d, (0..n * d).map(|v| ((v * 7919) % 101) as f64 + (v / d % 10) as f64).collect()).unwrap();
        let y = LabelVector::new((0..n).map(|i| i % 10).collect(), 10).unwrap();
        let z = lda_project(&x, &y, 3).unwrap();
        assert_eq!((z.rows(), z.cols()), (n, 3));
    }
}
