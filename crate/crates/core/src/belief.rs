//! The fetcher's belief over the worker's goal.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DomainInstance, OnticAction, StochasticPolicy};
use crate::query::{Query, Response};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeliefError {
    #[error("temperature must be positive, got {0}")]
    InvalidTemperature(f64),
    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),
    #[error("observed worker action {action} is not optimal for any supported goal")]
    InconsistentObservation { action: OnticAction },
    #[error("response {response:?} to {query} contradicts every supported goal")]
    InconsistentResponse { query: String, response: Response },
}

const SUM_TOLERANCE: f64 = 1e-9;

/// Probability vector over stations. The support (nonzero entries) is never
/// empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    probs: Vec<f64>,
    support: Vec<usize>,
}

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Self, BeliefError> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(BeliefError::InvalidProbabilities(
                "entries must be finite and non-negative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(BeliefError::InvalidProbabilities(format!(
                "entries sum to {total}"
            )));
        }
        let support = (0..probs.len()).filter(|&g| probs[g] > 0.0).collect();
        Ok(Belief { probs, support })
    }

    pub fn uniform(n: usize) -> Self {
        Belief::renormalized(vec![1.0; n]).expect("n > 0")
    }

    pub fn point_mass(n: usize, goal: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[goal] = 1.0;
        Belief::new(probs).expect("valid point mass")
    }

    /// Normalizes non-negative weights; `None` when all are zero.
    fn renormalized(mut weights: Vec<f64>) -> Option<Self> {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return None;
        }
        for w in &mut weights {
            *w /= total;
        }
        let support = (0..weights.len()).filter(|&g| weights[g] > 0.0).collect();
        Some(Belief {
            probs: weights,
            support,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, goal: usize) -> f64 {
        self.probs[goal]
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn num_goals(&self) -> usize {
        self.probs.len()
    }

    /// The goal when the support is a single station.
    pub fn certain_goal(&self) -> Option<usize> {
        match self.support.as_slice() {
            [g] => Some(*g),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    Uniform,
    /// `P(g) ∝ exp(d(worker, g) / τ)`: farther goals are likelier.
    BoltzmannDistance,
    /// `P(g) ∝ exp(-d(worker, g) / τ)`: closer goals are likelier.
    BoltzmannNegativeDistance,
}

impl PriorKind {
    pub const ALL: [PriorKind; 3] = [
        PriorKind::Uniform,
        PriorKind::BoltzmannDistance,
        PriorKind::BoltzmannNegativeDistance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PriorKind::Uniform => "uniform",
            PriorKind::BoltzmannDistance => "boltzmann_distance",
            PriorKind::BoltzmannNegativeDistance => "boltzmann_negative_distance",
        }
    }
}

impl std::str::FromStr for PriorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PriorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown prior kind `{s}`"))
    }
}

impl std::fmt::Display for PriorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalPrior {
    pub kind: PriorKind,
    /// Boltzmann temperature in grid steps.
    pub temperature: f64,
}

impl GoalPrior {
    pub fn new(kind: PriorKind) -> Self {
        GoalPrior {
            kind,
            temperature: 1.0,
        }
    }
}

/// Initial belief over the instance's stations, computed from the worker's
/// start cell.
pub fn prior(instance: &DomainInstance, prior: &GoalPrior) -> Result<Belief, BeliefError> {
    if !(prior.temperature > 0.0) || !prior.temperature.is_finite() {
        return Err(BeliefError::InvalidTemperature(prior.temperature));
    }
    let start = instance.worker_start();
    let sign = match prior.kind {
        PriorKind::Uniform => return Ok(Belief::uniform(instance.num_stations())),
        PriorKind::BoltzmannDistance => 1.0,
        PriorKind::BoltzmannNegativeDistance => -1.0,
    };
    let logits: Vec<f64> = instance
        .stations()
        .iter()
        .map(|s| sign * s.manhattan(start) as f64 / prior.temperature)
        .collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights = logits.iter().map(|l| (l - max).exp()).collect();
    Ok(Belief::renormalized(weights).expect("softmax has positive mass"))
}

/// Eliminates every goal whose URO policy gives the observed worker action
/// zero probability at `worker_cell`.
pub fn observe_action(
    belief: &Belief,
    worker_policies: &[StochasticPolicy],
    worker_cell: usize,
    action: OnticAction,
) -> Result<Belief, BeliefError> {
    let weights = belief
        .probs
        .iter()
        .enumerate()
        .map(|(g, &p)| {
            if p > 0.0 && worker_policies[g].prob(worker_cell, action) > 0.0 {
                p
            } else {
                0.0
            }
        })
        .collect();
    Belief::renormalized(weights).ok_or(BeliefError::InconsistentObservation { action })
}

/// Conditions on a truthful answer to "is your goal in `query`?".
pub fn observe_response(
    belief: &Belief,
    query: &Query,
    response: Response,
) -> Result<Belief, BeliefError> {
    let keep_inside = response == Response::Yes;
    let weights = belief
        .probs
        .iter()
        .enumerate()
        .map(|(g, &p)| if query.contains(g) == keep_inside { p } else { 0.0 })
        .collect();
    Belief::renormalized(weights).ok_or_else(|| BeliefError::InconsistentResponse {
        query: query.to_string(),
        response,
    })
}
