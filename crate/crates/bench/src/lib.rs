//! Shared fixtures for the benchmarks.

use ornn_core::data::{split, synth_blobs, SynthConfig};
use ornn_core::{Dataset, DiffuserConfig, FeatureMatrix, LabelVector, OpticalPipeline, OpticsConfig, ReadoutConfig};

pub fn synthetic(per_class: usize) -> Dataset {
    synth_blobs(&SynthConfig { per_class, ..SynthConfig::default() }).expect("synthetic set")
}

/// Desk-scale pipeline over `per_class * 2` synthetic samples.
pub fn desk_pipeline(per_class: usize) -> OpticalPipeline {
    let ds = synthetic(per_class);
    let sp = split(&ds, 0.8, 0).expect("split");
    OpticalPipeline::new(&ds, &OpticsConfig::desk(), &DiffuserConfig::desk(1), &ReadoutConfig::desk(), sp, None)
        .expect("pipeline")
}

/// Deterministic dense problem for ridge timing.
pub fn ridge_problem(n: usize, d: usize, classes: usize) -> (FeatureMatrix, LabelVector) {
    let data = (0..n * d).map(|k| ((k * 2_654_435_761) % 1000) as f64 / 1000.0).collect();
    let labels = (0..n).map(|i| (i * 7 + i / 3) % classes).collect();
    (FeatureMatrix::new(n, d, data).expect("features"), LabelVector::new(labels, classes).expect("labels"))
}
