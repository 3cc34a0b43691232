use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{input_err, Result};

/// Train and test indices into a dataset, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn indices_by_class(ds: &Dataset) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); ds.class_count()];
    for (i, &l) in ds.labels().as_slice().iter().enumerate() {
        by_class[l].push(i);
    }
    by_class
}

/// Draws `size / C` samples per class without replacement, kept in dataset order.
pub fn stratified_subset(ds: &Dataset, size: usize, seed: u64) -> Result<Dataset> {
    let classes = ds.class_count();
    if size == 0 || size % classes != 0 {
        return input_err(format!("subset size {size} is not a positive multiple of {classes} classes"));
    }
    let per_class = size / classes;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(size);
    for (c, mut members) in indices_by_class(ds).into_iter().enumerate() {
        if members.len() < per_class {
            return input_err(format!("class {c} has {} samples, {per_class} needed", members.len()));
        }
        members.shuffle(&mut rng);
        chosen.extend_from_slice(&members[..per_class]);
    }
    chosen.sort_unstable();
    Ok(ds.select(&chosen))
}

/// Stratified split: per class `floor(fraction * count)` to train, rest to test.
///
/// A declared split on the dataset takes precedence.
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<Split> {
    if let Some(declared) = ds.declared_split() {
        let mut s = Split { train: declared.train.clone(), test: declared.test.clone() };
        s.train.sort_unstable();
        s.test.sort_unstable();
        return Ok(s);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return input_err(format!("train fraction {train_fraction} outside (0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (c, mut members) in indices_by_class(ds).into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return input_err(format!("class {c} has a single sample and cannot be split"));
        }
        members.shuffle(&mut rng);
        let k = (train_fraction * members.len() as f64).floor() as usize;
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}
