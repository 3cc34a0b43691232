use std::sync::Mutex;

use ornn_core::evolve::{crossover_single_point, init_population, mutate};
use ornn_core::{ga_run, AngularStep, GaConfig, MutationMode, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const BINS: usize = 16;
// Upper 1% point of chi-square with 15 degrees of freedom.
const CHI2_15_CRITICAL: f64 = 30.58;

fn chi_square(samples: &[u32]) -> f64 {
    let mut counts = [0usize; BINS];
    for &s in samples {
        counts[s as usize * BINS / 4096] += 1;
    }
    let expected = samples.len() as f64 / BINS as f64;
    counts.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum()
}

fn toy(step: AngularStep) -> Result<f64> {
    Ok(-((step.get() as f64 - 1234.0).powi(2)))
}

#[test]
fn initial_population_is_uniform() {
    let samples: Vec<u32> = (0..10_000u64)
        .flat_map(|seed| init_population(&GaConfig { rng_seed: seed, ..GaConfig::default() }).unwrap().population().to_vec())
        .map(|g| g.get())
        .collect();
    let stat = chi_square(&samples);
    assert!(stat < CHI2_15_CRITICAL, "chi-square {stat}");
}

#[test]
fn reset_mutation_is_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let samples: Vec<u32> =
        (0..10_000).map(|_| mutate(AngularStep::new(0), 1.0, MutationMode::Reset, 12, &mut rng).get()).collect();
    let stat = chi_square(&samples);
    assert!(stat < CHI2_15_CRITICAL, "chi-square {stat}");
}

#[test]
fn crossover_fires_eighty_percent_of_the_time() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (a, b) = (AngularStep::new(0), AngularStep::new(4095));
    let trials = 10_000;
    // Any splice of these parents differs from `a`.
    let fired = (0..trials).filter(|_| crossover_single_point(a, b, 0.8, 12, &mut rng) != a).count();
    let rate = fired as f64 / trials as f64;
    assert!((rate - 0.8).abs() <= 0.02, "crossover rate {rate}");
}

#[test]
fn mutation_fires_one_percent_of_the_time() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = AngularStep::new(1234);
    let trials = 100_000;
    let flipped = (0..trials).filter(|_| mutate(g, 0.01, MutationMode::BitFlip, 12, &mut rng) != g).count();
    let rate = flipped as f64 / trials as f64;
    assert!((rate - 0.01).abs() <= 0.001, "bit-flip rate {rate}");
    // A reset can redraw the same value, 1 time in 4096.
    let reset = (0..trials).filter(|_| mutate(g, 0.01, MutationMode::Reset, 12, &mut rng) != g).count();
    let rate = reset as f64 / trials as f64;
    assert!((rate - 0.01).abs() <= 0.001, "reset rate {rate}");
}

#[test]
fn toy_run_reports_its_best_cached_gene() {
    for seed in 0..10 {
        let out = ga_run(&GaConfig { rng_seed: seed, ..GaConfig::default() }, &toy).unwrap();
        let top = out.cache.values().copied().fold(f64::MIN, f64::max);
        assert_eq!(out.best_fitness, top);
        assert_eq!(out.best_fitness, toy(out.best_gene).unwrap());
        assert!(out.best_fitness >= out.initial_best());
    }
}

#[test]
fn cache_is_coherent_and_best_never_drops() {
    for seed in 0..5 {
        let calls = Mutex::new(Vec::new());
        let score = |s: AngularStep| ((s.get() * 7919) % 1000) as f64;
        let fitness = |s: AngularStep| -> Result<f64> {
            calls.lock().unwrap().push(s);
            Ok(score(s))
        };
        let cfg = GaConfig { rng_seed: seed, ..GaConfig::default() };
        let out = ga_run(&cfg, &fitness).unwrap();
        let mut seen = calls.lock().unwrap().clone();
        let total = seen.len();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), total, "a gene was evaluated twice");
        assert_eq!(out.evaluations, total);
        assert!(total <= cfg.evaluation_budget());
        assert_eq!(out.log.len(), cfg.generations);
        for (g, f) in &out.cache {
            assert_eq!(*f, score(*g));
        }
        for rec in &out.log {
            for (g, f) in rec.genes.iter().zip(&rec.fitnesses) {
                assert_eq!(out.cache[g], *f);
            }
        }
        assert!(out.log.windows(2).all(|w| w[1].best_so_far >= w[0].best_so_far));
        assert_eq!(out.log.last().unwrap().best_so_far, out.best_fitness);
        assert_eq!(out.cache[&out.best_gene], out.best_fitness);
    }
}

#[test]
fn same_seed_same_run() {
    let cfg = GaConfig { rng_seed: 42, ..GaConfig::default() };
    let a = ga_run(&cfg, &toy).unwrap();
    let b = ga_run(&cfg, &toy).unwrap();
    assert_eq!(a.log, b.log);
}
