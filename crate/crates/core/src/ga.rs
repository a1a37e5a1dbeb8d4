//! The scalable genetic selector.
//!
//! Individuals are k-vectors of candidate indices. An optional one-pass
//! nearest-prototype clustering of the candidate pool constrains gene `j`
//! to cluster `j`, which both seeds the search with diverse individuals and
//! rules out duplicate genes by construction. Reproduction is uniform
//! gene-wise crossover with the best individual as the only parent; the
//! best individual itself is carried into the next generation unmutated.
//!
//! A master seed drives independent ChaCha streams for clustering,
//! initialization and the per-generation operators, so parallel fitness
//! evaluation can never perturb the operator sequence.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dissim::DissimilarityProvider;
use crate::dspace::PrototypeSet;
use crate::error::{Error, Result};
use crate::fitness::{FitnessContext, FitnessKind};

const CENTER_REDRAW_ROUNDS: usize = 20;
const REPAIR_ATTEMPTS: usize = 16;

/// Per-gene mutation probability for very large candidate pools, where a
/// wider exploration of the search space pays off.
pub const WIDE_SEARCH_MUTATION_PROB: f64 = 0.1;

/// One GA chromosome: a set of prototypes encoded as distinct indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub genes: Vec<usize>,
    pub cached_fitness: Option<f64>,
}

impl Individual {
    pub fn new(genes: Vec<usize>) -> Self {
        Self { genes, cached_fitness: None }
    }

    pub fn k(&self) -> usize {
        self.genes.len()
    }
}

/// Genetic algorithm parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaParams {
    /// Individuals in the population (S).
    pub population_size: usize,
    /// Per-gene probability of copying the best individual's gene (rp).
    pub reproduction_prob: f64,
    /// Per-gene mutation probability (mp).
    pub mutation_prob: f64,
    /// Number of generations after the initial population (iter).
    pub generations: usize,
    /// Cluster the candidate pool and constrain gene j to cluster j.
    pub use_clustering: bool,
    pub seed: u64,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            population_size: 20,
            reproduction_prob: 0.5,
            mutation_prob: 0.02,
            generations: 20,
            use_clustering: false,
            seed: 0,
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 {
            return Err(Error::InvalidParameter {
                name: "population_size",
                reason: "must be at least 1".into(),
            });
        }
        if self.generations == 0 {
            return Err(Error::InvalidParameter {
                name: "generations",
                reason: "must be at least 1".into(),
            });
        }
        for (name, p) in [
            ("reproduction_prob", self.reproduction_prob),
            ("mutation_prob", self.mutation_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("probability {p} not in [0, 1]"),
                });
            }
        }
        Ok(())
    }
}

/// One-pass assignment of every candidate to the nearest of k random centers.
#[derive(Clone, Debug)]
pub struct ClusterAssignment {
    center_indices: Vec<usize>,
    candidates: Vec<usize>,
    membership: Vec<u32>,
    members: Vec<Vec<usize>>,
    lookup: HashMap<usize, u32>,
}

impl ClusterAssignment {
    pub fn k(&self) -> usize {
        self.center_indices.len()
    }

    pub fn center_indices(&self) -> &[usize] {
        &self.center_indices
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    /// Cluster id per candidate position.
    pub fn membership(&self) -> &[u32] {
        &self.membership
    }

    /// Candidate objects assigned to cluster `j`.
    pub fn members(&self, j: usize) -> &[usize] {
        &self.members[j]
    }

    /// Cluster id of a candidate object, by its global index.
    pub fn cluster_of(&self, object: usize) -> Option<u32> {
        self.lookup.get(&object).copied()
    }
}

/// Cluster the candidate pool around k randomly chosen centers.
///
/// This is a single assignment pass, not an iterated k-medoids: the cost
/// stays at one measure evaluation per candidate-center pair. Centers are
/// redrawn (bounded) until every cluster is nonempty.
pub fn cluster_candidates(
    provider: &DissimilarityProvider,
    candidates: &[usize],
    k: usize,
    seed: u64,
) -> Result<ClusterAssignment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cluster_candidates_with_rng(provider, candidates, k, &mut rng)
}

fn cluster_candidates_with_rng(
    provider: &DissimilarityProvider,
    candidates: &[usize],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ClusterAssignment> {
    if k == 0 {
        return Err(Error::InvalidParameter { name: "k", reason: "must be at least 1".into() });
    }
    if candidates.len() < k {
        return Err(Error::PoolTooSmall { pool: candidates.len(), k });
    }
    for &c in candidates {
        if c >= provider.len() {
            return Err(Error::IndexOutOfRange { index: c, len: provider.len() });
        }
    }
    for _ in 0..CENTER_REDRAW_ROUNDS {
        let center_positions = rand::seq::index::sample(rng, candidates.len(), k).into_vec();
        let centers: Vec<usize> = center_positions.iter().map(|&p| candidates[p]).collect();
        let membership: Vec<u32> = candidates
            .par_iter()
            .map(|&c| {
                let mut best = f64::INFINITY;
                let mut arg = 0u32;
                for (j, &center) in centers.iter().enumerate() {
                    let d = provider.dist(c, center).expect("indices validated");
                    if d < best {
                        best = d;
                        arg = j as u32;
                    }
                }
                arg
            })
            .collect();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (pos, &cluster) in membership.iter().enumerate() {
            members[cluster as usize].push(candidates[pos]);
        }
        if members.iter().all(|m| !m.is_empty()) {
            let lookup = candidates
                .iter()
                .zip(&membership)
                .map(|(&c, &m)| (c, m))
                .collect();
            return Ok(ClusterAssignment {
                center_indices: centers,
                candidates: candidates.to_vec(),
                membership,
                members,
                lookup,
            });
        }
    }
    Err(Error::ClusteringFailed { rounds: CENTER_REDRAW_ROUNDS })
}

/// Draw the initial population.
///
/// With a cluster assignment, gene `j` is sampled uniformly from cluster `j`
/// (clusters partition the pool, so genes are distinct by construction).
/// Without one, each individual is k distinct uniform draws from the pool.
pub fn init_population(
    clusters: Option<&ClusterAssignment>,
    candidates: &[usize],
    k: usize,
    population_size: usize,
    seed: u64,
) -> Result<Vec<Individual>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_population_with_rng(clusters, candidates, k, population_size, &mut rng)
}

fn init_population_with_rng(
    clusters: Option<&ClusterAssignment>,
    candidates: &[usize],
    k: usize,
    population_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Individual>> {
    if population_size == 0 {
        return Err(Error::InvalidParameter {
            name: "population_size",
            reason: "must be at least 1".into(),
        });
    }
    if candidates.len() < k {
        return Err(Error::PoolTooSmall { pool: candidates.len(), k });
    }
    if let Some(clusters) = clusters {
        if clusters.k() != k {
            return Err(Error::InvalidParameter {
                name: "clusters",
                reason: format!("assignment has {} clusters, expected {k}", clusters.k()),
            });
        }
    }
    let mut population = Vec::with_capacity(population_size);
    for _ in 0..population_size {
        let genes = match clusters {
            Some(clusters) => (0..k)
                .map(|j| {
                    let pool = clusters.members(j);
                    pool[rng.gen_range(0..pool.len())]
                })
                .collect::<Vec<_>>(),
            None => {
                let mut genes: Vec<usize> = rand::seq::index::sample(rng, candidates.len(), k)
                    .into_iter()
                    .map(|p| candidates[p])
                    .collect();
                repair_distinct(&mut genes, None, candidates, rng);
                genes
            }
        };
        debug_assert!(genes_distinct(&genes));
        population.push(Individual::new(genes));
    }
    Ok(population)
}

fn genes_distinct(genes: &[usize]) -> bool {
    let mut sorted = genes.to_vec();
    sorted.sort_unstable();
    sorted.windows(2).all(|w| w[0] != w[1])
}

/// Redraw colliding genes until distinct: bounded redraws from the gene's
/// cluster (or the pool), then the lowest-index unused candidate.
fn repair_distinct(
    genes: &mut [usize],
    clusters: Option<&ClusterAssignment>,
    candidates: &[usize],
    rng: &mut ChaCha8Rng,
) {
    let mut seen: HashSet<usize> = HashSet::with_capacity(genes.len());
    for (j, gene) in genes.iter_mut().enumerate() {
        if seen.insert(*gene) {
            continue;
        }
        let pool: &[usize] = match clusters {
            Some(c) => c.members(j),
            None => candidates,
        };
        let mut fixed = false;
        for _ in 0..REPAIR_ATTEMPTS {
            let draw = pool[rng.gen_range(0..pool.len())];
            if !seen.contains(&draw) {
                *gene = draw;
                seen.insert(draw);
                fixed = true;
                break;
            }
        }
        if !fixed {
            let fallback = pool
                .iter()
                .copied()
                .filter(|c| !seen.contains(c))
                .min()
                .or_else(|| candidates.iter().copied().filter(|c| !seen.contains(c)).min());
            if let Some(c) = fallback {
                *gene = c;
                seen.insert(c);
            }
        }
    }
}

/// Uniform reproduction: gene-wise, take the best individual's gene with
/// probability `rp`, otherwise keep the current one.
pub fn reproduce(
    best: &Individual,
    current: &Individual,
    rp: f64,
    clusters: Option<&ClusterAssignment>,
    candidates: &[usize],
    rng: &mut ChaCha8Rng,
) -> Individual {
    debug_assert_eq!(best.k(), current.k());
    let mut genes: Vec<usize> = (0..current.k())
        .map(|j| {
            if rng.gen::<f64>() < rp {
                best.genes[j]
            } else {
                current.genes[j]
            }
        })
        .collect();
    repair_distinct(&mut genes, clusters, candidates, rng);
    Individual::new(genes)
}

/// Gene-wise mutation: with probability `mp`, redraw the gene uniformly from
/// its cluster (or the whole pool when unconstrained).
pub fn mutate(
    individual: &Individual,
    mp: f64,
    clusters: Option<&ClusterAssignment>,
    candidates: &[usize],
    rng: &mut ChaCha8Rng,
) -> Individual {
    let mut genes = individual.genes.clone();
    for (j, gene) in genes.iter_mut().enumerate() {
        if rng.gen::<f64>() < mp {
            let pool: &[usize] = match clusters {
                Some(c) => c.members(j),
                None => candidates,
            };
            *gene = pool[rng.gen_range(0..pool.len())];
        }
    }
    repair_distinct(&mut genes, clusters, candidates, rng);
    Individual::new(genes)
}

/// Snapshot handed to a run observer after every generation (generation 0 is
/// the evaluated initial population).
pub struct GaObservation<'a> {
    pub generation: usize,
    pub population: &'a [Individual],
    pub best_index: usize,
    pub best_fitness: f64,
    pub clusters: Option<&'a ClusterAssignment>,
}

/// Run the genetic selection and return the best prototype set observed.
///
/// The returned set carries a fitness trace with exactly
/// `params.generations` entries, non-decreasing thanks to elitism. Identical
/// inputs and seed reproduce the result exactly, regardless of evaluation
/// parallelism.
pub fn run_ga(
    ctx: &FitnessContext,
    fitness: FitnessKind,
    params: &GaParams,
    candidates: &[usize],
    k: usize,
) -> Result<PrototypeSet> {
    run_ga_observed(ctx, fitness, params, candidates, k, |_| {})
}

/// [`run_ga`] with an observer called after each generation's best-individual
/// update. Intended for instrumentation (invariant checks, live traces).
pub fn run_ga_observed(
    ctx: &FitnessContext,
    fitness: FitnessKind,
    params: &GaParams,
    candidates: &[usize],
    k: usize,
    mut observer: impl FnMut(&GaObservation),
) -> Result<PrototypeSet> {
    params.validate()?;
    if k == 0 {
        return Err(Error::InvalidParameter { name: "k", reason: "must be at least 1".into() });
    }
    if candidates.is_empty() || candidates.len() < k {
        return Err(Error::PoolTooSmall { pool: candidates.len(), k });
    }

    let stream = |n: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(n);
        rng
    };
    let clusters = if params.use_clustering {
        Some(cluster_candidates_with_rng(ctx.provider(), candidates, k, &mut stream(1))?)
    } else {
        None
    };
    let mut population =
        init_population_with_rng(clusters.as_ref(), candidates, k, params.population_size, &mut stream(2))?;
    let mut op_rng = stream(3);

    evaluate_population(&mut population, ctx, fitness)?;
    let mut best_index = argmax_fitness(&population);
    observer(&GaObservation {
        generation: 0,
        population: &population,
        best_index,
        best_fitness: population[best_index].cached_fitness.unwrap(),
        clusters: clusters.as_ref(),
    });

    let mut trace = Vec::with_capacity(params.generations);
    for generation in 1..=params.generations {
        let best = population[best_index].clone();
        for (idx, slot) in population.iter_mut().enumerate() {
            if idx == best_index {
                continue; // elitism: the best individual is never touched
            }
            let child =
                reproduce(&best, slot, params.reproduction_prob, clusters.as_ref(), candidates, &mut op_rng);
            *slot =
                mutate(&child, params.mutation_prob, clusters.as_ref(), candidates, &mut op_rng);
        }
        evaluate_population(&mut population, ctx, fitness)?;
        best_index = argmax_fitness(&population);
        let best_fitness = population[best_index].cached_fitness.unwrap();
        trace.push(best_fitness);
        observer(&GaObservation {
            generation,
            population: &population,
            best_index,
            best_fitness,
            clusters: clusters.as_ref(),
        });
    }

    let best = &population[best_index];
    let method = if params.use_clustering {
        format!("ga-{}-clust", fitness.name())
    } else {
        format!("ga-{}", fitness.name())
    };
    Ok(PrototypeSet::new(best.genes.clone(), method, params.seed)?.with_trace(trace))
}

/// Fill in missing cached fitness values, in parallel.
fn evaluate_population(
    population: &mut [Individual],
    ctx: &FitnessContext,
    fitness: FitnessKind,
) -> Result<()> {
    let pending: Vec<usize> = population
        .iter()
        .enumerate()
        .filter(|(_, ind)| ind.cached_fitness.is_none())
        .map(|(i, _)| i)
        .collect();
    let values: Vec<(usize, Result<f64>)> = pending
        .into_par_iter()
        .map(|i| (i, fitness.evaluate(&population[i], ctx)))
        .collect();
    for (i, value) in values {
        population[i].cached_fitness = Some(value?);
    }
    Ok(())
}

/// Index of the strictly best individual; ties keep the earliest.
fn argmax_fitness(population: &[Individual]) -> usize {
    let mut best = 0;
    let mut best_fitness = population[0].cached_fitness.expect("population evaluated");
    for (i, ind) in population.iter().enumerate().skip(1) {
        let f = ind.cached_fitness.expect("population evaluated");
        if f > best_fitness {
            best_fitness = f;
            best = i;
        }
    }
    best
}
