use super::LabelVector;
use crate::error::{input_err, Result};

/// Percentage of matching labels.
pub fn accuracy(pred: &LabelVector, truth: &LabelVector) -> Result<f64> {
    if pred.len() != truth.len() {
        return input_err(format!("{} predictions for {} labels", pred.len(), truth.len()));
    }
    if truth.is_empty() {
        return input_err("accuracy of an empty label set");
    }
    let hits = pred.as_slice().iter().zip(truth.as_slice()).filter(|(p, t)| p == t).count();
    Ok(100.0 * hits as f64 / truth.len() as f64)
}

/// Confusion matrix with each true-class row scaled to sum to 100.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    classes: usize,
    values: Vec<f64>,
    support: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Entry for true class `row`, predicted class `col`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.classes + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.classes..(row + 1) * self.classes]
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// True-class rows with no samples; these rows are all zero.
    pub fn empty_rows(&self) -> Vec<usize> {
        (0..self.classes).filter(|&r| self.support[r] == 0).collect()
    }
}

pub fn confusion_matrix_rownorm(pred: &LabelVector, truth: &LabelVector, classes: usize) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return input_err(format!("{} predictions for {} labels", pred.len(), truth.len()));
    }
    let mut counts = vec![0usize; classes * classes];
    for (&p, &t) in pred.as_slice().iter().zip(truth.as_slice()) {
        if p >= classes || t >= classes {
            return input_err(format!("label out of range for {classes} classes"));
        }
        counts[t * classes + p] += 1;
    }
    let support: Vec<usize> = (0..classes).map(|r| counts[r * classes..(r + 1) * classes].iter().sum()).collect();
    let values = counts
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let s = support[k / classes];
            if s == 0 {
                0.0
            } else {
                100.0 * n as f64 / s as f64
            }
        })
        .collect();
    Ok(ConfusionMatrix { classes, values, support })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn lv(v: &[usize], c: usize) -> LabelVector {
        LabelVector::new(v.to_vec(), c).unwrap()
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&lv(&[0, 1, 2], 3), &lv(&[0, 1, 2], 3)).unwrap(), 100.0);
        assert_eq!(accuracy(&lv(&[1, 0, 1], 2), &lv(&[0, 1, 0], 2)).unwrap(), 0.0);
        assert_eq!(accuracy(&lv(&[0, 1, 1, 1], 2), &lv(&[0, 1, 1, 0], 2)).unwrap(), 75.0);
        assert!(accuracy(&lv(&[0], 2), &lv(&[0, 1], 2)).is_err());
    }

    #[test]
    fn flipped_binary_predictions_are_complementary() {
        let truth = lv(&[0, 1, 1, 0, 1, 0, 0], 2);
        let pred = lv(&[0, 0, 1, 1, 1, 0, 1], 2);
        let flipped = lv(&pred.as_slice().iter().map(|p| 1 - p).collect::<Vec<_>>(), 2);
        let total = accuracy(&pred, &truth).unwrap() + accuracy(&flipped, &truth).unwrap();
        assert!((total - 100.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions_fill_the_diagonal() {
        let y = lv(&[0, 1, 2, 2, 1], 4);
        let cm = confusion_matrix_rownorm(&y, &y, 4).unwrap();
        for r in 0..3 {
            for c in 0..4 {
                assert_eq!(cm.get(r, c), if r == c { 100.0 } else { 0.0 });
            }
        }
        assert_eq!(cm.empty_rows(), vec![3]);
        assert!(cm.row(3).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn uniform_predictions_spread_evenly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let c = 5;
        let truth = lv(&(0..n).map(|i| i % c).collect::<Vec<_>>(), c);
        let pred = lv(&(0..n).map(|_| rng.random_range(0..c)).collect::<Vec<_>>(), c);
        let cm = confusion_matrix_rownorm(&pred, &truth, c).unwrap();
        for r in 0..c {
            assert!((cm.row(r).iter().sum::<f64>() - 100.0).abs() < 1e-9);
            for k in 0..c {
                assert!((cm.get(r, k) - 20.0).abs() < 1.0, "{}", cm.get(r, k));
            }
        }
    }
}
