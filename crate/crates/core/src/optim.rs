//! Query search: a small genetic algorithm over bit vectors, and an exact or
//! local-search solver for the weighted XOR objective
//!
//! ```text
//! maximise  Σ_{(i,j) ∈ pairs} (x_i ⊕ x_j)(P_i + P_j) − sc · Σ_i x_i
//! ```

use std::cmp::Ordering;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("population must be at least 2, got {0}")]
    Population(usize),
    #[error("tournament size must be between 1 and the population, got {0}")]
    Tournament(usize),
    #[error("mutation rate must lie in [0, 1], got {0}")]
    MutationRate(f64),
}

/// Fixed-length 0/1 vector; bit `i` says whether item `i` is selected.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitVector {
    bits: Vec<bool>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        BitVector { bits: vec![false; len] }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitVector { bits }
    }

    /// Bits `0..len` taken from the low end of `mask`.
    pub fn from_mask(mask: u64, len: usize) -> Self {
        BitVector {
            bits: (0..len).map(|i| mask >> i & 1 == 1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i] = !self.bits[i];
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }
}

/// Tie order between equally good vectors: fewer set bits first, then the
/// lexicographically smaller `(x_0, x_1, ...)` with `0 < 1`.
pub fn tie_order(a: &BitVector, b: &BitVector) -> Ordering {
    a.count_ones()
        .cmp(&b.count_ones())
        .then_with(|| a.bits.cmp(&b.bits))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub mutation_rate: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 50,
            generations: 100,
            tournament_size: 3,
            mutation_rate: 0.001,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        if self.population < 2 {
            return Err(OptimError::Population(self.population));
        }
        if self.tournament_size == 0 || self.tournament_size > self.population {
            return Err(OptimError::Tournament(self.tournament_size));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(OptimError::MutationRate(self.mutation_rate));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        GaConfig { seed, ..self }
    }
}

/// Maximises `fitness` over `n_bits`-long vectors and returns the best member
/// seen in any generation with its fitness.
///
/// Fitness is assumed pure; repeated members are evaluated once.
pub fn ga_optimize(
    mut fitness: impl FnMut(&BitVector) -> f64,
    n_bits: usize,
    config: &GaConfig,
) -> Result<(BitVector, f64), OptimError> {
    config.validate()?;
    assert!(n_bits >= 1, "ga_optimize needs at least one bit");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut cache: HashMap<BitVector, f64> = HashMap::new();
    let mut eval = |v: &BitVector| -> f64 {
        if let Some(&f) = cache.get(v) {
            return f;
        }
        let f = fitness(v);
        cache.insert(v.clone(), f);
        f
    };

    let mut population: Vec<BitVector> = (0..config.population)
        .map(|_| BitVector::from_bits((0..n_bits).map(|_| rng.gen::<bool>()).collect()))
        .collect();
    let mut scores: Vec<f64> = population.iter().map(&mut eval).collect();
    let mut best = 0;
    for i in 1..population.len() {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    let (mut best_v, mut best_f) = (population[best].clone(), scores[best]);

    for _ in 0..config.generations {
        let mut next = Vec::with_capacity(config.population);
        while next.len() < config.population {
            let a = tournament(&scores, config.tournament_size, &mut rng);
            let b = tournament(&scores, config.tournament_size, &mut rng);
            let (mut c1, mut c2) = (population[a].clone(), population[b].clone());
            if n_bits > 1 {
                let cut = rng.gen_range(1..n_bits);
                c1.bits[cut..].swap_with_slice(&mut c2.bits[cut..]);
            }
            for child in [c1, c2] {
                if next.len() == config.population {
                    break;
                }
                let mut child = child;
                for i in 0..n_bits {
                    if rng.gen::<f64>() < config.mutation_rate {
                        child.flip(i);
                    }
                }
                next.push(child);
            }
        }
        population = next;
        scores = population.iter().map(&mut eval).collect();
        for (v, &f) in population.iter().zip(&scores) {
            if f > best_f {
                best_v = v.clone();
                best_f = f;
            }
        }
    }
    Ok((best_v, best_f))
}

fn tournament(scores: &[f64], size: usize, rng: &mut ChaCha8Rng) -> usize {
    let mut winner = rng.gen_range(0..scores.len());
    for _ in 1..size {
        let c = rng.gen_range(0..scores.len());
        if scores[c] > scores[winner] {
            winner = c;
        }
    }
    winner
}

/// Largest instance solved by exhaustive enumeration.
pub const EXACT_LIMIT: usize = 15;
const LOCAL_RESTARTS: usize = 16;
const LOCAL_SEED: u64 = 0x5eed_0b1e_c71e;
const TIE_EPS: f64 = 1e-12;

/// Value of the XOR objective at `x`.
pub fn query_objective(pairs: &[(usize, usize)], probs: &[f64], sc: f64, x: &BitVector) -> f64 {
    let split: f64 = pairs
        .iter()
        .filter(|&&(i, j)| x.get(i) != x.get(j))
        .map(|&(i, j)| probs[i] + probs[j])
        .sum();
    split - sc * x.count_ones() as f64
}

fn better(cand: &BitVector, f: f64, best: &BitVector, best_f: f64) -> bool {
    if f > best_f + TIE_EPS {
        return true;
    }
    f >= best_f - TIE_EPS && tie_order(cand, best) == Ordering::Less
}

/// Maximiser of the XOR objective over `probs.len()` bits, with its value.
/// Exact up to [`EXACT_LIMIT`] bits; seeded local search with restarts
/// beyond.
pub fn solve_query_objective(
    pairs: &[(usize, usize)],
    probs: &[f64],
    sc: f64,
) -> (BitVector, f64) {
    let n = probs.len();
    let mut best = BitVector::zeros(n);
    let mut best_f = query_objective(pairs, probs, sc, &best);
    if n <= EXACT_LIMIT {
        for mask in 1u64..(1 << n) {
            let x = BitVector::from_mask(mask, n);
            let f = query_objective(pairs, probs, sc, &x);
            if better(&x, f, &best, best_f) {
                best = x;
                best_f = f;
            }
        }
        return (best, best_f);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(LOCAL_SEED);
    for _ in 0..LOCAL_RESTARTS {
        let mut x = BitVector::from_bits((0..n).map(|_| rng.gen::<bool>()).collect());
        let mut f = query_objective(pairs, probs, sc, &x);
        loop {
            let mut step: Option<(usize, f64)> = None;
            for i in 0..n {
                x.flip(i);
                let g = query_objective(pairs, probs, sc, &x);
                x.flip(i);
                if g > f + TIE_EPS && step.is_none_or(|(_, s)| g > s) {
                    step = Some((i, g));
                }
            }
            match step {
                Some((i, g)) => {
                    x.flip(i);
                    f = g;
                }
                None => break,
            }
        }
        if better(&x, f, &best, best_f) {
            best = x;
            best_f = f;
        }
    }
    (best, best_f)
}
