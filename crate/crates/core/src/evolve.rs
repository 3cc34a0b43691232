//! Genetic search over disk orientations.
//!
//! A gene is one [`AngularStep`], treated as a 12-bit string for crossover.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffuser::{AngularStep, STEPS_PER_REVOLUTION};
use crate::error::{config_err, Error, Result};

/// Anything that scores a disk orientation.
pub trait Fitness: Sync {
    fn evaluate(&self, step: AngularStep) -> Result<f64>;
}

impl<F> Fitness for F
where
    F: Fn(AngularStep) -> Result<f64> + Sync,
{
    fn evaluate(&self, step: AngularStep) -> Result<f64> {
        self(step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationMode {
    /// Replace the whole gene with a uniform draw.
    Reset,
    /// Flip one uniformly chosen bit.
    BitFlip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaConfig {
    pub generations: usize,
    pub population: usize,
    pub parents: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub mutation_mode: MutationMode,
    pub elitism: usize,
    pub gene_bits: u32,
    pub rng_seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            generations: 12,
            population: 4,
            parents: 2,
            crossover_prob: 0.8,
            mutation_prob: 0.01,
            mutation_mode: MutationMode::Reset,
            elitism: 1,
            gene_bits: 12,
            rng_seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.generations == 0 {
            return config_err("at least one generation is required");
        }
        if !(self.population > self.parents && self.parents >= 2) {
            return config_err("population must exceed parents, and parents must be at least 2");
        }
        if self.elitism >= self.population {
            return config_err("elitism must be smaller than the population");
        }
        if self.gene_bits >= 32 || 1u32 << self.gene_bits != STEPS_PER_REVOLUTION {
            return config_err(format!("2^gene_bits must equal {STEPS_PER_REVOLUTION}"));
        }
        for (name, p) in [("crossover_prob", self.crossover_prob), ("mutation_prob", self.mutation_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return config_err(format!("{name} = {p} is not a probability"));
            }
        }
        Ok(())
    }

    /// Upper bound on distinct fitness evaluations.
    pub fn evaluation_budget(&self) -> usize {
        self.population + (self.generations - 1) * (self.population - self.elitism)
    }
}

/// One evaluated generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub genes: Vec<AngularStep>,
    pub fitnesses: Vec<f64>,
    pub best_gene: AngularStep,
    pub best_so_far: f64,
}

#[derive(Debug, Clone)]
pub struct GaState {
    generation: usize,
    population: Vec<AngularStep>,
    cache: BTreeMap<AngularStep, f64>,
    best: Option<(AngularStep, f64)>,
    rng: ChaCha8Rng,
}

impl GaState {
    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn population(&self) -> &[AngularStep] {
        &self.population
    }

    pub fn cache(&self) -> &BTreeMap<AngularStep, f64> {
        &self.cache
    }

    pub fn best(&self) -> Option<(AngularStep, f64)> {
        self.best
    }

    /// Distinct genes evaluated so far.
    pub fn evaluation_count(&self) -> usize {
        self.cache.len()
    }

    pub fn fitness_of(&self, gene: AngularStep) -> Option<f64> {
        self.cache.get(&gene).copied()
    }

    /// Scores every population member missing from the cache.
    ///
    /// Distinct new genes are evaluated concurrently and inserted in ascending gene order.
    pub fn evaluate_population(&mut self, fitness: &dyn Fitness) -> Result<()> {
        let mut pending: Vec<AngularStep> =
            self.population.iter().copied().filter(|g| !self.cache.contains_key(g)).collect();
        pending.sort_unstable();
        pending.dedup();
        let scores: Vec<Result<f64>> = pending.par_iter().map(|&g| fitness.evaluate(g)).collect();
        for (gene, score) in pending.into_iter().zip(scores) {
            let score = score?;
            if !score.is_finite() {
                return Err(Error::Internal(format!("fitness of step {gene} is not finite")));
            }
            self.cache.insert(gene, score);
        }
        Ok(())
    }

    /// Population members ordered best first; ties go to the lower step.
    fn ranked(&self) -> Result<Vec<(AngularStep, f64)>> {
        let mut ranked = Vec::with_capacity(self.population.len());
        for &g in &self.population {
            match self.cache.get(&g) {
                Some(&f) => ranked.push((g, f)),
                None => return Err(Error::State(format!("step {g} has not been evaluated"))),
            }
        }
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.dedup_by_key(|(g, _)| *g);
        Ok(ranked)
    }
}

/// Draws a population of distinct uniform genes.
pub fn init_population(config: &GaConfig) -> Result<GaState> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let population = rand::seq::index::sample(&mut rng, STEPS_PER_REVOLUTION as usize, config.population)
        .into_iter()
        .map(|g| AngularStep::new(g as i64))
        .collect();
    Ok(GaState { generation: 0, population, cache: BTreeMap::new(), best: None, rng })
}

/// The `count` fittest distinct genes of the current population.
pub fn select_parents(state: &GaState, count: usize) -> Result<Vec<AngularStep>> {
    let ranked = state.ranked()?;
    let mut parents: Vec<AngularStep> = ranked.iter().take(count).map(|(g, _)| *g).collect();
    while parents.len() < count {
        parents.push(parents[0]);
    }
    Ok(parents)
}

/// High `cut` bits of `a` joined to the low `bits - cut` bits of `b`.
pub fn splice(a: AngularStep, b: AngularStep, cut: u32, bits: u32) -> AngularStep {
    let low_mask = (1u32 << (bits - cut)) - 1;
    AngularStep::new(((a.get() & !low_mask) | (b.get() & low_mask)) as i64)
}

/// Applies single-point crossover with probability `prob`, else returns `a`.
pub fn crossover_single_point<R: Rng>(a: AngularStep, b: AngularStep, prob: f64, bits: u32, rng: &mut R) -> AngularStep {
    if rng.random::<f64>() < prob {
        let cut = rng.random_range(1..bits);
        splice(a, b, cut, bits)
    } else {
        a
    }
}

pub fn mutate<R: Rng>(gene: AngularStep, prob: f64, mode: MutationMode, bits: u32, rng: &mut R) -> AngularStep {
    if rng.random::<f64>() >= prob {
        return gene;
    }
    match mode {
        MutationMode::Reset => AngularStep::new(rng.random_range(0..(1i64 << bits))),
        MutationMode::BitFlip => AngularStep::new((gene.get() ^ (1 << rng.random_range(0..bits))) as i64),
    }
}

/// Result of a complete search.
#[derive(Debug, Clone)]
pub struct GaOutcome {
    pub best_gene: AngularStep,
    pub best_fitness: f64,
    pub log: Vec<GenerationRecord>,
    pub evaluations: usize,
    pub cache: BTreeMap<AngularStep, f64>,
}

impl GaOutcome {
    /// Best fitness in the first evaluated generation.
    pub fn initial_best(&self) -> f64 {
        self.log[0].best_so_far
    }
}

pub fn ga_run(config: &GaConfig, fitness: &dyn Fitness) -> Result<GaOutcome> {
    ga_run_observed(config, fitness, &mut |_| Ok(()))
}

/// Runs the search, handing each finished generation to `observer` before breeding.
///
/// A failed evaluation aborts the run; generations already passed to the observer stay valid.
pub fn ga_run_observed(
    config: &GaConfig,
    fitness: &dyn Fitness,
    observer: &mut dyn FnMut(&GenerationRecord) -> Result<()>,
) -> Result<GaOutcome> {
    let mut state = init_population(config)?;
    let mut log = Vec::with_capacity(config.generations);
    loop {
        state.evaluate_population(fitness)?;
        let ranked = state.ranked()?;
        let (top_gene, top_fit) = ranked[0];
        match state.best {
            Some((_, f)) if f >= top_fit => {}
            _ => state.best = Some((top_gene, top_fit)),
        }
        let (best_gene, best_so_far) = state.best.expect("set above");
        let record = GenerationRecord {
            generation: state.generation,
            genes: state.population.clone(),
            fitnesses: state.population.iter().map(|g| state.cache[g]).collect(),
            best_gene,
            best_so_far,
        };
        observer(&record)?;
        log.push(record);
        if state.generation + 1 == config.generations {
            break;
        }

        let parents = select_parents(&state, config.parents)?;
        let mut next: Vec<AngularStep> = ranked.iter().take(config.elitism).map(|(g, _)| *g).collect();
        while next.len() < config.population {
            let i = state.rng.random_range(0..parents.len());
            let mut j = state.rng.random_range(0..parents.len() - 1);
            if j >= i {
                j += 1;
            }
            let child = crossover_single_point(parents[i], parents[j], config.crossover_prob, config.gene_bits, &mut state.rng);
            next.push(mutate(child, config.mutation_prob, config.mutation_mode, config.gene_bits, &mut state.rng));
        }
        state.population = next;
        state.generation += 1;
    }
    let (best_gene, best_fitness) = state.best.expect("at least one generation ran");
    Ok(GaOutcome { best_gene, best_fitness, log, evaluations: state.cache.len(), cache: state.cache })
}
