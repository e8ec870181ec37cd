use serde::{Deserialize, Serialize};

use super::{generate_instance, instance_seed, BenchError, PrecomputeCache, SweepConfig};
use crate::belief::{prior, PriorKind};
use crate::domain::UroPolicies;
use crate::planners::{Decision, PlannerKind, PlanningContext};
use crate::sim::{default_step_cap, run_episode, EpisodeResult};

/// Enough to re-run one sweep episode and check its decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub instance_id: usize,
    pub prior: PriorKind,
    pub per_station_cost: f64,
    pub planner: PlannerKind,
    pub seed: u64,
    pub goal: usize,
    pub total_cost: f64,
    pub decisions: Vec<Decision>,
}

impl EpisodeLog {
    pub fn new(instance_id: usize, prior: PriorKind, per_station_cost: f64, r: &EpisodeResult) -> Self {
        EpisodeLog {
            instance_id,
            prior,
            per_station_cost,
            planner: r.planner,
            seed: r.seed,
            goal: r.goal,
            total_cost: r.total_cost,
            decisions: r.decisions().cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub result: EpisodeResult,
    /// Index of the first decision that differs from the log, or the shorter
    /// length when one trace is a prefix of the other.
    pub first_mismatch: Option<usize>,
}

impl ReplayOutcome {
    pub fn matches(&self) -> bool {
        self.first_mismatch.is_none()
    }
}

/// Re-runs a logged episode from the sweep config. A cache for the instance
/// can be supplied to skip the precompute.
pub fn replay(
    config: &SweepConfig,
    log: &EpisodeLog,
    cache: Option<&PrecomputeCache>,
) -> Result<ReplayOutcome, BenchError> {
    let instance = generate_instance(config, instance_seed(config, log.instance_id))?;
    let policies = UroPolicies::new(&instance);
    let built;
    let cache = match cache {
        Some(c) if c.matches(&instance) => c,
        Some(_) => {
            return Err(BenchError::Cache(format!(
                "cache does not belong to instance {}",
                log.instance_id
            )))
        }
        None => {
            built = PrecomputeCache::build_with(&instance, &policies, &config.edp_config())
                .map_err(|source| BenchError::Precompute {
                    instance: log.instance_id,
                    source,
                })?;
            &built
        }
    };
    let belief = prior(&instance, &config.goal_prior(log.prior))
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let ctx = PlanningContext {
        instance: &instance,
        policies: &policies,
        tables: &cache.tables,
        cost: config.cost_model(log.per_station_cost),
        ga: config.ga,
    };
    let result = run_episode(
        &ctx,
        log.goal,
        log.planner,
        &belief,
        log.seed,
        default_step_cap(&instance),
    )?;
    let replayed: Vec<&Decision> = result.decisions().collect();
    let first_mismatch = replayed
        .iter()
        .zip(&log.decisions)
        .position(|(a, b)| *a != b)
        .or_else(|| {
            (replayed.len() != log.decisions.len())
                .then(|| replayed.len().min(log.decisions.len()))
        })
        .or_else(|| (result.total_cost != log.total_cost).then_some(replayed.len()));
    Ok(ReplayOutcome {
        result,
        first_mismatch,
    })
}
