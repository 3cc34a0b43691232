//! Subcommands. Each `run_*` function computes a report in memory; the `cmd_*`
//! wrappers add the files under the output directory.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use ornn_core::binfmt::write_features;
use ornn_core::data::{synth_blobs, write_idx_images, write_idx_labels};
use ornn_core::evolve::ga_run_observed;
use ornn_core::readout::{separability_score, ssim, LdaProjection};
use ornn_core::{AngularStep, Evaluation, FeatureMatrix, GaOutcome, GenerationRecord, OpticalPipeline, STEPS_PER_REVOLUTION};
use serde_json::json;

use crate::config::{derive_seed, DatasetSpec, ExperimentConfig, SALT_TRIAL};
use crate::experiment::{evaluate_split, WorkingSet};
use crate::output::{confusion_table, ProgressiveCsv, RunManifest, RunRecorder, Table};

/// Bad invocation, reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

fn snapshot(rec: &mut RunRecorder, cfg: &ExperimentConfig) -> Result<()> {
    rec.write("config.toml", cfg.to_toml()?.as_bytes())
}

// ---- ga ----

pub struct GaReport {
    pub outcome: GaOutcome,
    pub gain: f64,
    pub first: Evaluation,
    pub last: Evaluation,
    pub features: FeatureMatrix,
    pub samples: usize,
    pub propagations: u64,
}

fn log_header(population: usize) -> Vec<String> {
    let mut h = vec!["generation".to_string()];
    h.extend((0..population).map(|i| format!("gene_{i}")));
    h.extend((0..population).map(|i| format!("fitness_{i}")));
    h.extend(["best_gene".to_string(), "best_so_far".to_string()]);
    h
}

fn log_row(rec: &GenerationRecord) -> Vec<String> {
    let mut row = vec![rec.generation.to_string()];
    row.extend(rec.genes.iter().map(|g| g.get().to_string()));
    row.extend(rec.fitnesses.iter().map(|f| f.to_string()));
    row.extend([rec.best_gene.get().to_string(), rec.best_so_far.to_string()]);
    row
}

/// Calibrates exposure once, runs the search and scores the first and final best kernels.
pub fn run_ga(
    cfg: &ExperimentConfig,
    ws: &WorkingSet,
    observer: &mut dyn FnMut(&GenerationRecord) -> Result<()>,
) -> Result<GaReport> {
    let pipeline = ws.pipeline(cfg, &cfg.readout, None)?;
    let outcome = search(cfg, &pipeline, observer)?;
    let first = pipeline.evaluate(outcome.log[0].best_gene)?;
    let features = pipeline.features_at(outcome.best_gene)?;
    let last = pipeline.evaluate_features(&features)?;
    Ok(GaReport {
        gain: pipeline.gain(),
        first,
        last,
        features,
        samples: ws.dataset.len(),
        propagations: pipeline.propagations(),
        outcome,
    })
}

fn search(
    cfg: &ExperimentConfig,
    pipeline: &OpticalPipeline,
    observer: &mut dyn FnMut(&GenerationRecord) -> Result<()>,
) -> Result<GaOutcome> {
    let mut failure = None;
    let mut bridge = |rec: &GenerationRecord| -> ornn_core::Result<()> {
        observer(rec).map_err(|e| {
            let msg = e.to_string();
            failure = Some(e);
            ornn_core::Error::Io(std::io::Error::other(msg))
        })
    };
    match ga_run_observed(&cfg.ga, pipeline, &mut bridge) {
        Ok(o) => Ok(o),
        Err(e) => Err(failure.unwrap_or_else(|| e.into())),
    }
}

pub fn cmd_ga(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    let mut rec = RunRecorder::start(out, "ga")?;
    snapshot(&mut rec, cfg)?;
    let ws = WorkingSet::prepare(cfg, true)?;
    let header = log_header(cfg.ga.population);
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut log = ProgressiveCsv::create(&rec.path("ga_log.csv"), &refs)?;
    let result = run_ga(cfg, &ws, &mut |r| log.row(log_row(r)));
    log.close()?;
    rec.record("ga_log.csv");
    let report = result?;
    rec.table("confusion_first.csv", confusion_table(&report.first.confusion)?)?;
    rec.table("confusion_final.csv", confusion_table(&report.last.confusion)?)?;
    let mut bin = Vec::new();
    write_features(&mut bin, &report.features)?;
    rec.write("features.bin", &bin)?;
    let o = &report.outcome;
    let metrics = json!({
        "samples": report.samples,
        "best_step": o.best_gene.get(),
        "best_fitness": o.best_fitness,
        "initial_best_step": o.log[0].best_gene.get(),
        "initial_best": o.initial_best(),
        "evaluations": o.evaluations,
        "propagations": report.propagations,
        "features": report.features.cols(),
    });
    rec.finish(cfg, Some(report.gain), metrics)
}

// ---- infer ----

pub struct InferReport {
    pub step: AngularStep,
    pub gain: f64,
    pub evaluation: Evaluation,
    pub samples: usize,
}

/// Propagates the working set at a fixed step; `gain = None` calibrates afresh.
pub fn run_infer(cfg: &ExperimentConfig, ws: &WorkingSet, step: AngularStep, gain: Option<f64>) -> Result<InferReport> {
    let pipeline = ws.pipeline(cfg, &cfg.readout, gain)?;
    let evaluation = pipeline.evaluate(step)?;
    Ok(InferReport { step, gain: pipeline.gain(), evaluation, samples: ws.dataset.len() })
}

pub struct InferArgs<'a> {
    pub config: Option<ExperimentConfig>,
    pub step: Option<u32>,
    pub manifest: Option<&'a Path>,
    /// Infer on the configured subset instead of the full dataset.
    pub use_subset: bool,
}

pub fn cmd_infer(args: InferArgs<'_>, out: &Path) -> Result<RunManifest> {
    let prior = args.manifest.map(RunManifest::read).transpose()?;
    let cfg = match (args.config, &prior) {
        (Some(c), _) => c,
        (None, Some(m)) => m.config.clone(),
        (None, None) => return usage("infer needs --config or --manifest"),
    };
    let step = match (args.step, &prior) {
        (Some(s), _) => s,
        (None, Some(m)) => match m.best_step() {
            Some(s) => s,
            None => return usage("the manifest records no best step; pass --step"),
        },
        (None, None) => return usage("infer needs --step or --manifest"),
    };
    if step >= STEPS_PER_REVOLUTION {
        return usage(format!("step {step} is outside [0, {STEPS_PER_REVOLUTION})"));
    }
    let gain = prior.as_ref().and_then(|m| m.gain);
    let mut rec = RunRecorder::start(out, "infer")?;
    snapshot(&mut rec, &cfg)?;
    let ws = WorkingSet::prepare(&cfg, args.use_subset)?;
    let report = run_infer(&cfg, &ws, AngularStep::new(step as i64), gain)?;
    rec.table("confusion.csv", confusion_table(&report.evaluation.confusion)?)?;
    let metrics = json!({
        "step": step,
        "samples": report.samples,
        "test_samples": report.evaluation.truth.len(),
        "accuracy": report.evaluation.accuracy,
    });
    rec.finish(&cfg, Some(report.gain), metrics)
}

// ---- baseline ----

/// Ridge on raw pixels of the working set, no optics.
pub fn run_baseline(cfg: &ExperimentConfig, ws: &WorkingSet) -> Result<Evaluation> {
    let x = ws.dataset.pixel_features()?;
    evaluate_split(&x, ws.dataset.labels(), &ws.split, &cfg.readout)
}

pub fn cmd_baseline(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    let mut rec = RunRecorder::start(out, "baseline")?;
    snapshot(&mut rec, cfg)?;
    let ws = WorkingSet::prepare(cfg, true)?;
    let eval = run_baseline(cfg, &ws)?;
    rec.table("confusion.csv", confusion_table(&eval.confusion)?)?;
    let (h, w) = ws.dataset.image(0).dims();
    let metrics = json!({
        "samples": ws.dataset.len(),
        "test_samples": eval.truth.len(),
        "features": h * w,
        "accuracy": eval.accuracy,
    });
    rec.finish(cfg, None, metrics)
}

// ---- analyze ----

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyzeMode {
    Ssim,
    Lda,
    Bitdepth,
    Poolsweep,
}

impl std::str::FromStr for AnalyzeMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ssim" => Ok(Self::Ssim),
            "lda" => Ok(Self::Lda),
            "bitdepth" => Ok(Self::Bitdepth),
            "poolsweep" => Ok(Self::Poolsweep),
            _ => Err(format!("unknown mode {s:?}; expected ssim, lda, bitdepth or poolsweep")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SsimReport {
    pub deltas: Vec<i64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Mean SSIM between captures at 0, 90, 180 and 270 degrees.
    pub quarter_turns: [[f64; 4]; 4],
    pub gains: Vec<f64>,
}

/// Screen seed, sample and start step of SSIM trial `t`. Trial 0 uses the configured screen.
pub fn ssim_trial(cfg: &ExperimentConfig, t: u64, samples: usize) -> (u64, usize, AngularStep) {
    let r = derive_seed(cfg.seed.wrapping_add(t), SALT_TRIAL);
    let screen = if t == 0 { cfg.diffuser.seed } else { derive_seed(r, 1) };
    let sample = (r % samples as u64) as usize;
    let start = AngularStep::new(((r >> 20) % STEPS_PER_REVOLUTION as u64) as i64);
    (screen, sample, start)
}

pub fn run_ssim(cfg: &ExperimentConfig, ws: &WorkingSet) -> Result<SsimReport> {
    let max = cfg.analysis.ssim_max_delta;
    let deltas: Vec<i64> = (-max..=max).collect();
    let trials = cfg.analysis.ssim_trials;
    let mut per_trial = Vec::with_capacity(trials);
    let mut quarter_turns = [[0.0; 4]; 4];
    let mut gains = Vec::with_capacity(trials);
    for t in 0..trials as u64 {
        let (screen, sample, start) = ssim_trial(cfg, t, ws.dataset.len());
        let mut c = cfg.clone();
        c.diffuser.seed = screen;
        let pipeline = ws.pipeline(&c, &c.readout, None)?;
        gains.push(pipeline.gain());
        let reference = pipeline.capture(sample, start)?;
        let row = deltas
            .iter()
            .map(|&d| if d == 0 { Ok(1.0) } else { Ok(ssim(&reference, &pipeline.capture(sample, start.offset(d))?)?) })
            .collect::<Result<Vec<f64>>>()?;
        debug_assert_eq!(ssim(&reference, &reference)?, 1.0);
        per_trial.push(row);
        let quarter = STEPS_PER_REVOLUTION as i64 / 4;
        let frames = (0..4)
            .map(|k| pipeline.capture(sample, AngularStep::new(k * quarter)))
            .collect::<ornn_core::Result<Vec<_>>>()?;
        for a in 0..4 {
            for b in 0..4 {
                quarter_turns[a][b] += ssim(&frames[a], &frames[b])? / trials as f64;
            }
        }
    }
    let n = trials as f64;
    let mean: Vec<f64> = (0..deltas.len()).map(|j| per_trial.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let std = (0..deltas.len())
        .map(|j| (per_trial.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    Ok(SsimReport { deltas, mean, std, quarter_turns, gains })
}

#[derive(Debug, Clone)]
pub struct LdaStage {
    pub stage: &'static str,
    pub step: AngularStep,
    pub accuracy: f64,
    pub train_separability: f64,
    pub test_separability: f64,
    pub projection: FeatureMatrix,
}

/// LDA diagnostics at the first, middle and final best kernels of a GA run.
pub fn run_lda(cfg: &ExperimentConfig, ws: &WorkingSet) -> Result<(GaOutcome, Vec<LdaStage>)> {
    let classes = ws.dataset.class_count();
    if classes < 2 {
        bail!("LDA needs at least two classes");
    }
    let pipeline = ws.pipeline(cfg, &cfg.readout, None)?;
    let outcome = search(cfg, &pipeline, &mut |_| Ok(()))?;
    let log = &outcome.log;
    let stages = [("first", log[0].best_gene), ("mid", log[(log.len() - 1) / 2].best_gene), ("final", outcome.best_gene)];
    let labels = ws.dataset.labels();
    let (y_train, y_test) = (labels.select(&ws.split.train), labels.select(&ws.split.test));
    let mut out = Vec::new();
    for (stage, step) in stages {
        let x = pipeline.features_at(step)?;
        let k = cfg.analysis.lda_components.min(classes - 1).min(x.cols());
        let lda = LdaProjection::fit(&x.select_rows(&ws.split.train)?, &y_train, k)?;
        let projection = lda.transform(&x)?;
        out.push(LdaStage {
            stage,
            step,
            accuracy: pipeline.fitness(step)?,
            train_separability: separability_score(&projection.select_rows(&ws.split.train)?, &y_train)?,
            test_separability: separability_score(&projection.select_rows(&ws.split.test)?, &y_test)?,
            projection,
        });
    }
    Ok((outcome, out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BitDepthRow {
    pub bit_depth: u8,
    /// Best accuracy of a GA run from scratch at this depth.
    pub with_ga: f64,
    /// Accuracy of the 8-bit GA-best kernel captured at this depth.
    pub without_ga: f64,
    pub ga_step: AngularStep,
}

pub fn run_bitdepth(cfg: &ExperimentConfig, ws: &WorkingSet) -> Result<(AngularStep, Vec<BitDepthRow>)> {
    let readout_at = |b: u8| {
        let mut r = cfg.readout.clone();
        r.bit_depth = b;
        r
    };
    let mut pipeline = ws.pipeline(cfg, &readout_at(8), None)?;
    let reference = search(cfg, &pipeline, &mut |_| Ok(()))?.best_gene;
    let mut rows = Vec::new();
    for &b in &cfg.analysis.bit_depths {
        pipeline.set_readout(&readout_at(b))?;
        let without_ga = pipeline.fitness(reference)?;
        let run = search(cfg, &pipeline, &mut |_| Ok(()))?;
        rows.push(BitDepthRow { bit_depth: b, with_ga: run.best_fitness, without_ga, ga_step: run.best_gene });
    }
    Ok((reference, rows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolRow {
    pub pool: (usize, usize),
    pub features: usize,
    pub accuracy: f64,
}

/// Accuracy at one kernel across pool sizes; without `step` the GA-best kernel is used.
pub fn run_poolsweep(cfg: &ExperimentConfig, ws: &WorkingSet, step: Option<AngularStep>) -> Result<(AngularStep, Vec<PoolRow>)> {
    let mut pipeline = ws.pipeline(cfg, &cfg.readout, None)?;
    let step = match step {
        Some(s) => s,
        None => search(cfg, &pipeline, &mut |_| Ok(()))?.best_gene,
    };
    let mut rows = Vec::new();
    for &(ph, pw) in &cfg.analysis.pool_sizes {
        let mut r = cfg.readout.clone();
        (r.pool_height, r.pool_width) = (ph, pw);
        pipeline.set_readout(&r)?;
        let features = (cfg.optics.camera_height / ph) * (cfg.optics.camera_width / pw);
        rows.push(PoolRow { pool: (ph, pw), features, accuracy: pipeline.fitness(step)? });
    }
    Ok((step, rows))
}

pub fn cmd_analyze(cfg: &ExperimentConfig, mode: AnalyzeMode, step: Option<u32>, out: &Path) -> Result<RunManifest> {
    let name = match mode {
        AnalyzeMode::Ssim => "analyze ssim",
        AnalyzeMode::Lda => "analyze lda",
        AnalyzeMode::Bitdepth => "analyze bitdepth",
        AnalyzeMode::Poolsweep => "analyze poolsweep",
    };
    if step.is_some() && mode != AnalyzeMode::Poolsweep {
        return usage("--step only applies to --mode poolsweep");
    }
    if let Some(s) = step.filter(|&s| s >= STEPS_PER_REVOLUTION) {
        return usage(format!("step {s} is outside [0, {STEPS_PER_REVOLUTION})"));
    }
    let mut rec = RunRecorder::start(out, name)?;
    snapshot(&mut rec, cfg)?;
    let ws = WorkingSet::prepare(cfg, true)?;
    let (gain, metrics) = match mode {
        AnalyzeMode::Ssim => {
            let r = run_ssim(cfg, &ws)?;
            let mut t = Table::new(&["delta", "mean_ssim", "std_ssim"])?;
            for ((d, m), s) in r.deltas.iter().zip(&r.mean).zip(&r.std) {
                t.row([d.to_string(), m.to_string(), s.to_string()])?;
            }
            rec.table("ssim_falloff.csv", t)?;
            let mut q = Table::new(&["angle_a", "angle_b", "mean_ssim"])?;
            for (a, row) in r.quarter_turns.iter().enumerate() {
                for (b, v) in row.iter().enumerate() {
                    q.row([(90 * a).to_string(), (90 * b).to_string(), v.to_string()])?;
                }
            }
            rec.table("ssim_quarter_turns.csv", q)?;
            (r.gains.first().copied(), json!({ "trials": r.gains.len(), "trial_gains": r.gains }))
        }
        AnalyzeMode::Lda => {
            let (outcome, stages) = run_lda(cfg, &ws)?;
            let k = stages[0].projection.cols();
            let mut header = vec!["stage".to_string(), "step".into(), "sample".into(), "label".into(), "split".into()];
            header.extend((0..k).map(|i| format!("ld_{i}")));
            let refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let mut p = Table::new(&refs)?;
            let mut in_train = vec![false; ws.dataset.len()];
            ws.split.train.iter().for_each(|&i| in_train[i] = true);
            for s in &stages {
                for (i, &train) in in_train.iter().enumerate() {
                    let mut row = vec![
                        s.stage.to_string(),
                        s.step.get().to_string(),
                        ws.dataset.origin()[i].to_string(),
                        ws.dataset.labels().get(i).to_string(),
                        if train { "train" } else { "test" }.to_string(),
                    ];
                    row.extend(s.projection.row(i).iter().map(|v| v.to_string()));
                    p.row(row)?;
                }
            }
            rec.table("lda_projections.csv", p)?;
            let mut t = Table::new(&["stage", "step", "accuracy", "train_separability", "test_separability"])?;
            for s in &stages {
                t.row([
                    s.stage.to_string(),
                    s.step.get().to_string(),
                    s.accuracy.to_string(),
                    s.train_separability.to_string(),
                    s.test_separability.to_string(),
                ])?;
            }
            rec.table("lda_scores.csv", t)?;
            (None, json!({ "components": k, "best_step": outcome.best_gene.get(), "best_fitness": outcome.best_fitness }))
        }
        AnalyzeMode::Bitdepth => {
            let (reference, rows) = run_bitdepth(cfg, &ws)?;
            let mut t = Table::new(&["bit_depth", "with_GA", "without_GA"])?;
            for r in &rows {
                t.row([r.bit_depth.to_string(), r.with_ga.to_string(), r.without_ga.to_string()])?;
            }
            rec.table("bitdepth.csv", t)?;
            let steps: Vec<u32> = rows.iter().map(|r| r.ga_step.get()).collect();
            (None, json!({ "reference_step": reference.get(), "ga_steps": steps }))
        }
        AnalyzeMode::Poolsweep => {
            let (step, rows) = run_poolsweep(cfg, &ws, step.map(|s| AngularStep::new(s as i64)))?;
            let mut t = Table::new(&["pool_h", "pool_w", "features", "accuracy"])?;
            for r in &rows {
                t.row([r.pool.0.to_string(), r.pool.1.to_string(), r.features.to_string(), r.accuracy.to_string()])?;
            }
            rec.table("poolsweep.csv", t)?;
            (None, json!({ "step": step.get() }))
        }
    };
    rec.finish(cfg, gain, metrics)
}

// ---- synth-data ----

/// Writes the configured synthetic set as an IDX image/label pair.
pub fn cmd_synth_data(cfg: &ExperimentConfig, out: &Path) -> Result<(PathBuf, PathBuf)> {
    let DatasetSpec::Synthetic(s) = &cfg.dataset else {
        return usage("synth-data needs a synthetic dataset section");
    };
    let mut rec = RunRecorder::start(out, "synth-data")?;
    snapshot(&mut rec, cfg)?;
    let ds = synth_blobs(s)?;
    let images: Vec<_> = ds.images().cloned().collect();
    let labels: Vec<u8> = ds.labels().as_slice().iter().map(|&l| l as u8).collect();
    let (img_path, lab_path) = (rec.path("synth-images-idx3-ubyte"), rec.path("synth-labels-idx1-ubyte"));
    write_idx_images(&img_path, &images)?;
    rec.record("synth-images-idx3-ubyte");
    write_idx_labels(&lab_path, &labels)?;
    rec.record("synth-labels-idx1-ubyte");
    rec.finish(cfg, None, json!({ "samples": ds.len(), "classes": ds.class_count() }))?;
    Ok((img_path, lab_path))
}
