use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use super::{derive_seed, generate_instance, instance_seed, BenchError, EpisodeLog, PrecomputeCache, SweepConfig};
use crate::belief::{prior, Belief, PriorKind};
use crate::domain::UroPolicies;
use crate::planners::{PlannerKind, PlanningContext};
use crate::sim::{default_step_cap, run_episode_timed};

/// One episode of one sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub instance_id: usize,
    pub prior: PriorKind,
    pub per_station_cost: f64,
    pub planner: PlannerKind,
    pub seed: u64,
    pub total_cost: f64,
    pub marginal_cost: f64,
    pub num_queries: usize,
    #[serde(skip)]
    pub query_timesteps: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub timestep: u32,
    pub planner: PlannerKind,
    pub query_count: usize,
}

/// Aggregate of one (prior, per-station cost, planner) column over all
/// instances, with a paired sign test against the eZ_Q planner on the same
/// episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub prior: PriorKind,
    pub per_station_cost: f64,
    pub planner: PlannerKind,
    pub episodes: usize,
    pub mean_marginal_cost: f64,
    pub se_marginal_cost: f64,
    pub total_queries: usize,
    pub mean_queries: f64,
    pub ezq_better: usize,
    pub ezq_worse: usize,
    pub sign_test_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub instance_id: usize,
    pub prior: Option<PriorKind>,
    pub per_station_cost: Option<f64>,
    pub planner: Option<PlannerKind>,
    pub error: String,
}

/// Wall-clock accounting, kept apart from the deterministic outputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepTiming {
    pub precompute_secs: Vec<f64>,
    /// Per planner: (decisions, mean seconds, max seconds).
    pub decisions: BTreeMap<PlannerKind, (usize, f64, f64)>,
}

impl SweepTiming {
    pub fn max_decision_secs(&self) -> f64 {
        self.decisions.values().map(|d| d.2).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<EpisodeRow>,
    pub histogram: Vec<HistogramRow>,
    pub summary: Vec<SummaryRow>,
    pub failures: Vec<CellFailure>,
    pub logs: Vec<EpisodeLog>,
    pub timing: SweepTiming,
}

/// Seed of episode `episode` for `(instance, prior)`. Shared by every cost
/// and planner so comparisons are paired.
pub fn episode_seed(config: &SweepConfig, instance: usize, prior: PriorKind, episode: usize) -> u64 {
    derive_seed(
        config.seed,
        &[0xe915, instance as u64, prior as u64, episode as u64],
    )
}

/// True goal of an episode, drawn from the prior with the episode seed.
pub fn episode_goal(belief: &Belief, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x90a1]));
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &g in belief.support() {
        acc += belief.prob(g);
        if u < acc {
            return g;
        }
    }
    *belief.support().last().expect("nonempty support")
}

/// Two-sided exact sign test p-value for `wins` against `losses`, ties
/// dropped.
pub fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = (wins + losses) as u64;
    if n == 0 {
        return 1.0;
    }
    let k = wins.min(losses) as u64;
    let b = Binomial::new(0.5, n).expect("valid binomial");
    (2.0 * b.cdf(k)).min(1.0)
}

struct InstanceResult {
    rows: Vec<EpisodeRow>,
    failures: Vec<CellFailure>,
    logs: Vec<EpisodeLog>,
    precompute: Duration,
    decisions: Vec<(PlannerKind, Duration)>,
}

fn run_instance(config: &SweepConfig, id: usize, log: bool) -> InstanceResult {
    let mut out = InstanceResult {
        rows: Vec::new(),
        failures: Vec::new(),
        logs: Vec::new(),
        precompute: Duration::ZERO,
        decisions: Vec::new(),
    };
    let fail = |prior, cost, planner, error: String| CellFailure {
        instance_id: id,
        prior,
        per_station_cost: cost,
        planner,
        error,
    };
    let instance = match generate_instance(config, instance_seed(config, id)) {
        Ok(i) => i,
        Err(e) => {
            out.failures.push(fail(None, None, None, e.to_string()));
            return out;
        }
    };
    let started = Instant::now();
    let policies = UroPolicies::new(&instance);
    let cache = PrecomputeCache::build_with(&instance, &policies, &config.edp_config());
    out.precompute = started.elapsed();
    let cache = match cache {
        Ok(c) => c,
        Err(e) => {
            out.failures.push(fail(None, None, None, format!("precompute: {e}")));
            return out;
        }
    };
    let step_cap = default_step_cap(&instance);

    for &kind in &config.priors {
        let belief = match prior(&instance, &config.goal_prior(kind)) {
            Ok(b) => b,
            Err(e) => {
                out.failures.push(fail(Some(kind), None, None, e.to_string()));
                continue;
            }
        };
        let episodes: Vec<(u64, usize)> = (0..config.episodes_per_instance)
            .map(|e| {
                let seed = episode_seed(config, id, kind, e);
                (seed, episode_goal(&belief, seed))
            })
            .collect();
        for &cost in &config.per_station_costs {
            let ctx = PlanningContext {
                instance: &instance,
                policies: &policies,
                tables: &cache.tables,
                cost: config.cost_model(cost),
                ga: config.ga,
            };
            for &planner in &config.planners {
                let mut cell = Vec::new();
                let mut cell_logs = Vec::new();
                let mut times = Vec::new();
                let result: Result<(), String> = episodes.iter().try_for_each(|&(seed, goal)| {
                    let (r, t) = run_episode_timed(&ctx, goal, planner, &belief, seed, step_cap)
                        .map_err(|e| format!("episode seed {seed} goal {goal}: {e}"))?;
                    times.extend(t);
                    if log {
                        cell_logs.push(EpisodeLog::new(id, kind, cost, &r));
                    }
                    cell.push(EpisodeRow {
                        instance_id: id,
                        prior: kind,
                        per_station_cost: cost,
                        planner,
                        seed,
                        total_cost: r.total_cost,
                        marginal_cost: r.marginal_cost,
                        num_queries: r.num_queries(),
                        query_timesteps: r.query_log.iter().map(|q| q.timestep).collect(),
                    });
                    Ok(())
                });
                out.decisions.extend(times.into_iter().map(|d| (planner, d)));
                match result {
                    Ok(()) => {
                        out.rows.extend(cell);
                        out.logs.extend(cell_logs);
                    }
                    Err(e) => {
                        eprintln!("instance {id} {kind} cost {cost} {planner}: {e}");
                        out.failures.push(fail(Some(kind), Some(cost), Some(planner), e));
                    }
                }
            }
        }
    }
    out
}

fn row_key(r: &EpisodeRow) -> (usize, PriorKind, u64, PlannerKind, u64) {
    (r.instance_id, r.prior, r.per_station_cost.to_bits(), r.planner, r.seed)
}

/// Runs every (instance, prior, cost, planner) cell. Episodes of the first
/// `log_instances` instances are kept as replayable logs.
pub fn run_sweep(config: &SweepConfig, log_instances: usize) -> Result<SweepOutput, BenchError> {
    config.validate()?;
    let results: Vec<InstanceResult> = (0..config.instances)
        .into_par_iter()
        .map(|id| run_instance(config, id, id < log_instances))
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut logs = Vec::new();
    let mut timing = SweepTiming::default();
    let mut latency: BTreeMap<PlannerKind, Vec<Duration>> = BTreeMap::new();
    for r in results {
        rows.extend(r.rows);
        failures.extend(r.failures);
        logs.extend(r.logs);
        timing.precompute_secs.push(r.precompute.as_secs_f64());
        for (p, d) in r.decisions {
            latency.entry(p).or_default().push(d);
        }
    }
    rows.sort_by_key(row_key);
    for (p, ds) in latency {
        let n = ds.len();
        let mean = ds.iter().map(Duration::as_secs_f64).sum::<f64>() / n.max(1) as f64;
        let max = ds.iter().map(Duration::as_secs_f64).fold(0.0, f64::max);
        timing.decisions.insert(p, (n, mean, max));
    }

    let histogram = histogram(config, &rows);
    let summary = summarize(config, &rows);
    Ok(SweepOutput {
        rows,
        histogram,
        summary,
        failures,
        logs,
        timing,
    })
}

fn histogram(config: &SweepConfig, rows: &[EpisodeRow]) -> Vec<HistogramRow> {
    let mut counts: BTreeMap<(u32, PlannerKind), usize> = BTreeMap::new();
    let mut last = 0;
    for r in rows {
        for &t in &r.query_timesteps {
            *counts.entry((t, r.planner)).or_default() += 1;
            last = last.max(t);
        }
    }
    let mut planners = config.planners.clone();
    planners.sort();
    planners.dedup();
    (1..=last)
        .flat_map(|t| planners.iter().map(move |&p| (t, p)))
        .map(|(t, p)| HistogramRow {
            timestep: t,
            planner: p,
            query_count: counts.get(&(t, p)).copied().unwrap_or(0),
        })
        .collect()
}

fn summarize(config: &SweepConfig, rows: &[EpisodeRow]) -> Vec<SummaryRow> {
    type Column = (PriorKind, u64, PlannerKind);
    let mut columns: BTreeMap<Column, Vec<&EpisodeRow>> = BTreeMap::new();
    for r in rows {
        columns
            .entry((r.prior, r.per_station_cost.to_bits(), r.planner))
            .or_default()
            .push(r);
    }
    let mut out = Vec::new();
    for &prior in &config.priors {
        for &cost in &config.per_station_costs {
            let ezq: BTreeMap<(usize, u64), f64> = columns
                .get(&(prior, cost.to_bits(), PlannerKind::Ezq))
                .into_iter()
                .flatten()
                .map(|r| ((r.instance_id, r.seed), r.marginal_cost))
                .collect();
            for &planner in &config.planners {
                let Some(col) = columns.get(&(prior, cost.to_bits(), planner)) else {
                    continue;
                };
                let n = col.len();
                let mean = col.iter().map(|r| r.marginal_cost).sum::<f64>() / n as f64;
                let var = if n > 1 {
                    col.iter().map(|r| (r.marginal_cost - mean).powi(2)).sum::<f64>()
                        / (n - 1) as f64
                } else {
                    0.0
                };
                let total_queries: usize = col.iter().map(|r| r.num_queries).sum();
                let (mut better, mut worse) = (0, 0);
                for r in col {
                    if let Some(&e) = ezq.get(&(r.instance_id, r.seed)) {
                        if e < r.marginal_cost {
                            better += 1;
                        } else if e > r.marginal_cost {
                            worse += 1;
                        }
                    }
                }
                out.push(SummaryRow {
                    prior,
                    per_station_cost: cost,
                    planner,
                    episodes: n,
                    mean_marginal_cost: mean,
                    se_marginal_cost: (var / n as f64).sqrt(),
                    total_queries,
                    mean_queries: total_queries as f64 / n as f64,
                    ezq_better: better,
                    ezq_worse: worse,
                    sign_test_p: sign_test(better, worse),
                });
            }
        }
    }
    out
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub(super) const RESULT_HEADER: [&str; 8] = [
    "instance_id",
    "prior",
    "per_station_cost",
    "planner",
    "seed",
    "total_cost",
    "marginal_cost",
    "num_queries",
];
pub(super) const HISTOGRAM_HEADER: [&str; 3] = ["timestep", "planner", "query_count"];
pub(super) const SUMMARY_HEADER: [&str; 11] = [
    "prior",
    "per_station_cost",
    "planner",
    "episodes",
    "mean_marginal_cost",
    "se_marginal_cost",
    "total_queries",
    "mean_queries",
    "ezq_better",
    "ezq_worse",
    "sign_test_p",
];

impl SweepOutput {
    /// Writes `results.csv`, `histogram.csv`, `summary.csv` and
    /// `failures.csv`, all pure functions of the config, and `timing.json`,
    /// which is not.
    pub fn write(&self, dir: &Path) -> Result<(), BenchError> {
        std::fs::create_dir_all(dir)?;
        write_rows(&dir.join("results.csv"), &self.rows, &RESULT_HEADER)?;
        write_rows(&dir.join("histogram.csv"), &self.histogram, &HISTOGRAM_HEADER)?;
        write_rows(&dir.join("summary.csv"), &self.summary, &SUMMARY_HEADER)?;
        write_rows(
            &dir.join("failures.csv"),
            &self.failures,
            &["instance_id", "prior", "per_station_cost", "planner", "error"],
        )?;
        std::fs::write(
            dir.join("timing.json"),
            serde_json::to_string_pretty(&self.timing)?,
        )?;
        if !self.logs.is_empty() {
            let mut text = String::new();
            for l in &self.logs {
                text.push_str(&serde_json::to_string(l)?);
                text.push('\n');
            }
            std::fs::write(dir.join("episodes.jsonl"), text)?;
        }
        Ok(())
    }

    pub fn summary_for(&self, prior: PriorKind, cost: f64, planner: PlannerKind) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.prior == prior && s.per_station_cost == cost && s.planner == planner)
    }
}

/// Reads back a `summary.csv`.
pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>, BenchError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Reads back a `histogram.csv`.
pub fn read_histogram(path: &Path) -> Result<Vec<HistogramRow>, BenchError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}
