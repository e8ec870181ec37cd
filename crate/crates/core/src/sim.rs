//! Episode simulation.
//!
//! Each timestep the fetcher decides first. A query costs its price and both
//! agents stay put while the worker answers; an ontic step costs 1, the
//! worker samples its URO action and the fetcher observes it.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{observe_action, observe_response, Belief, BeliefError};
use crate::domain::{
    fetcher_step, worker_step, Coord, DomainError, DomainInstance, FetcherState, OnticAction,
};
use crate::planners::{decide, Decision, DecisionState, PlannerKind, PlanningContext};
use crate::query::{Query, Response};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("episode did not finish within {cap} timesteps")]
    Livelock { cap: u32 },
    #[error("step cap {cap} does not exceed the optimal cost {optimal}")]
    StepCap { cap: u32, optimal: f64 },
    #[error("goal {goal} has zero prior probability")]
    ImpossibleGoal { goal: usize },
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Episode length when the fetcher knows the goal from the start: the longer
/// of the worker's walk and the fetcher's walk through the toolbox, including
/// the pickup.
pub fn optimal_cost(instance: &DomainInstance, goal: usize) -> Result<f64, DomainError> {
    let station = instance.station(goal)?;
    let toolbox = instance.toolbox_for(goal)?;
    let worker = instance.worker_start().manhattan(station);
    let fetcher = instance.fetcher_start().manhattan(toolbox) + 1 + toolbox.manhattan(station);
    Ok(worker.max(fetcher) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub timestep: u32,
    pub query: Query,
    pub response: Response,
    pub cost: f64,
}

/// One joint timestep. `worker_action` is `None` on query timesteps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub timestep: u32,
    pub decision: Decision,
    pub worker_action: Option<OnticAction>,
    pub worker: Coord,
    pub fetcher: FetcherState,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub goal: usize,
    pub planner: PlannerKind,
    pub seed: u64,
    pub total_cost: f64,
    pub optimal_cost: f64,
    pub marginal_cost: f64,
    pub timesteps: u32,
    pub query_log: Vec<QueryRecord>,
    pub final_belief: Belief,
    pub trace: Vec<TraceStep>,
}

impl EpisodeResult {
    pub fn num_queries(&self) -> usize {
        self.query_log.len()
    }

    pub fn decisions(&self) -> impl Iterator<Item = &Decision> {
        self.trace.iter().map(|s| &s.decision)
    }
}

/// Worker and planner randomness come from separate streams of one seed, so
/// a planner that draws more or fewer numbers never shifts the worker's path.
fn streams(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut worker = ChaCha8Rng::seed_from_u64(seed);
    worker.set_stream(0);
    let mut planner = ChaCha8Rng::seed_from_u64(seed);
    planner.set_stream(1);
    (worker, planner)
}

pub fn run_episode(
    ctx: &PlanningContext,
    goal: usize,
    planner: PlannerKind,
    prior: &Belief,
    seed: u64,
    step_cap: u32,
) -> Result<EpisodeResult, SimError> {
    simulate(ctx, goal, planner, prior, seed, step_cap, |_| {})
}

/// Like [`run_episode`], also returning the wall time of every planner
/// decision.
pub fn run_episode_timed(
    ctx: &PlanningContext,
    goal: usize,
    planner: PlannerKind,
    prior: &Belief,
    seed: u64,
    step_cap: u32,
) -> Result<(EpisodeResult, Vec<Duration>), SimError> {
    let mut times = Vec::new();
    let result = simulate(ctx, goal, planner, prior, seed, step_cap, |d| times.push(d))?;
    Ok((result, times))
}

fn simulate(
    ctx: &PlanningContext,
    goal: usize,
    planner: PlannerKind,
    prior: &Belief,
    seed: u64,
    step_cap: u32,
    mut on_decision: impl FnMut(Duration),
) -> Result<EpisodeResult, SimError> {
    let instance = ctx.instance;
    let station = instance.station(goal)?;
    let optimal = optimal_cost(instance, goal)?;
    if step_cap as f64 <= optimal {
        return Err(SimError::StepCap { cap: step_cap, optimal });
    }
    if prior.prob(goal) <= 0.0 {
        return Err(SimError::ImpossibleGoal { goal });
    }
    let worker_policy = &ctx.policies.worker[goal];
    let (mut worker_rng, mut planner_rng) = streams(seed);

    let mut worker = instance.worker_start();
    let mut fetcher = FetcherState::empty_handed(instance.fetcher_start());
    let mut belief = prior.clone();
    let mut total = 0.0;
    let mut query_log = Vec::new();
    let mut trace = Vec::new();
    let mut t = 0u32;

    while !(worker == station && fetcher.pos == station && fetcher.held == Some(goal)) {
        if t == step_cap {
            return Err(SimError::Livelock { cap: step_cap });
        }
        t += 1;
        let state = DecisionState {
            worker,
            fetcher,
            belief: &belief,
            t: 1,
        };
        let started = Instant::now();
        let decision = decide(planner, ctx, &state, &mut planner_rng);
        on_decision(started.elapsed());

        let worker_action = match &decision {
            Decision::Ask(q) => {
                let response = q.response_for(goal);
                let cost = ctx.cost.query_timestep_cost(q);
                belief = observe_response(&belief, q, response)?;
                total += cost;
                query_log.push(QueryRecord {
                    timestep: t,
                    query: q.clone(),
                    response,
                    cost,
                });
                None
            }
            Decision::Ontic(action) => {
                let u = worker_rng.gen::<f64>();
                let wa = worker_policy.dist(instance.cell_index(worker)).sample(u);
                belief = observe_action(&belief, &ctx.policies.worker, instance.cell_index(worker), wa)?;
                worker = worker_step(instance, worker, wa)?;
                fetcher = fetcher_step(instance, fetcher, *action)?;
                total += 1.0;
                Some(wa)
            }
        };
        trace.push(TraceStep {
            timestep: t,
            decision,
            worker_action,
            worker,
            fetcher,
            support: belief.support().len(),
        });
    }

    Ok(EpisodeResult {
        goal,
        planner,
        seed,
        total_cost: total,
        optimal_cost: optimal,
        marginal_cost: total - optimal,
        timesteps: t,
        query_log,
        final_belief: belief,
        trace,
    })
}

/// Default step cap for an instance: generous enough that only a planner
/// that stalls forever can hit it.
pub fn default_step_cap(instance: &DomainInstance) -> u32 {
    (4 * (instance.width() + instance.height()) + 16) as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{InstanceLayout, UroPolicies};
    use crate::edp::EdpConfig;
    use crate::optim::GaConfig;
    use crate::query::CostModel;
    use crate::zones::ZoneTables;
    use std::collections::{HashMap, VecDeque};

    fn opposed() -> DomainInstance {
        DomainInstance::new(InstanceLayout {
            width: 9,
            height: 5,
            stations: vec![Coord::new(0, 4), Coord::new(8, 4)],
            toolboxes: vec![Coord::new(1, 2), Coord::new(7, 2)],
            tool_of: vec![0, 1],
            worker_start: Coord::new(4, 0),
            fetcher_start: Coord::new(4, 2),
        })
        .unwrap()
    }

    /// Shortest joint plan by BFS over (fetcher state, worker position),
    /// the worker walking straight to its goal.
    fn bfs_optimal(inst: &DomainInstance, goal: usize) -> usize {
        let station = inst.station(goal).unwrap();
        let start = (FetcherState::empty_handed(inst.fetcher_start()), inst.worker_start());
        let mut seen = HashMap::from([(start, 0usize)]);
        let mut queue = VecDeque::from([start]);
        while let Some((f, w)) = queue.pop_front() {
            let d = seen[&(f, w)];
            if w == station && f.pos == station && f.held == Some(goal) {
                return d;
            }
            let w_next = if w == station {
                w
            } else {
                crate::domain::MOVES
                    .into_iter()
                    .filter_map(|a| inst.shift(w, a))
                    .find(|n| n.manhattan(station) < w.manhattan(station))
                    .unwrap()
            };
            let mut actions: Vec<OnticAction> = crate::domain::MOVES.to_vec();
            actions.push(OnticAction::Noop);
            actions.push(OnticAction::Pickup(goal));
            for a in actions {
                if let Ok(nf) = fetcher_step(inst, f, a) {
                    if let std::collections::hash_map::Entry::Vacant(e) = seen.entry((nf, w_next)) {
                        e.insert(d + 1);
                        queue.push_back((nf, w_next));
                    }
                }
            }
        }
        unreachable!()
    }

    #[test]
    fn optimal_cost_cases() {
        let inst = opposed();
        // Worker walks 8; fetcher walks 3, picks up, walks 3.
        assert_eq!(optimal_cost(&inst, 0).unwrap(), 8.0);
        let far_worker = DomainInstance::new(InstanceLayout {
            worker_start: Coord::new(8, 0),
            fetcher_start: Coord::new(1, 3),
            ..inst.layout().clone()
        })
        .unwrap();
        assert_eq!(optimal_cost(&far_worker, 0).unwrap(), 12.0);
        let at_goal = DomainInstance::new(InstanceLayout {
            worker_start: Coord::new(0, 4),
            ..inst.layout().clone()
        })
        .unwrap();
        assert_eq!(optimal_cost(&at_goal, 0).unwrap(), 7.0);
        for i in [&inst, &far_worker, &at_goal] {
            for g in 0..2 {
                assert_eq!(optimal_cost(i, g).unwrap(), bfs_optimal(i, g) as f64);
            }
        }
    }

    struct Setup {
        inst: DomainInstance,
        policies: UroPolicies,
        tables: ZoneTables,
    }

    fn setup(inst: DomainInstance) -> Setup {
        let policies = UroPolicies::new(&inst);
        let tables = ZoneTables::build(&inst, &policies, &EdpConfig::default()).unwrap();
        Setup { inst, policies, tables }
    }

    fn ctx(s: &Setup, base: f64, per_station: f64) -> PlanningContext<'_> {
        PlanningContext {
            instance: &s.inst,
            policies: &s.policies,
            tables: &s.tables,
            cost: CostModel::new(base, per_station).unwrap(),
            ga: GaConfig::default(),
        }
    }

    #[test]
    fn point_mass_prior_is_free() {
        let s = setup(opposed());
        let c = ctx(&s, 0.5, 0.1);
        for kind in PlannerKind::ALL {
            for goal in 0..2 {
                let r = run_episode(&c, goal, kind, &Belief::point_mass(2, goal), 7, 100).unwrap();
                assert_eq!(r.marginal_cost, 0.0, "{kind} goal {goal}");
                assert_eq!(r.num_queries(), 0);
            }
        }
    }

    #[test]
    fn first_worker_move_disambiguates() {
        // Stations straight west and east of the worker: its first move
        // reveals the goal before the fetcher has to commit.
        let inst = DomainInstance::new(InstanceLayout {
            width: 9,
            height: 5,
            stations: vec![Coord::new(0, 0), Coord::new(8, 0)],
            toolboxes: vec![Coord::new(4, 4)],
            tool_of: vec![0, 0],
            worker_start: Coord::new(4, 0),
            fetcher_start: Coord::new(4, 1),
        })
        .unwrap();
        let s = setup(inst);
        let c = ctx(&s, 0.5, 0.0);
        for seed in 0..5 {
            for goal in 0..2 {
                let r = run_episode(&c, goal, PlannerKind::NeverQuery, &Belief::uniform(2), seed, 100)
                    .unwrap();
                assert_eq!(r.marginal_cost, 0.0);
            }
        }
    }

    #[test]
    fn ambiguity_costs_noops_or_queries() {
        let s = setup(opposed());
        let c = ctx(&s, 0.5, 0.0);
        let prior = Belief::uniform(2);
        let mut stalled = 0;
        for seed in 0..10 {
            for goal in 0..2 {
                // The fetcher has one step of slack; every further Noop costs 1.
                let never = run_episode(&c, goal, PlannerKind::NeverQuery, &prior, seed, 100).unwrap();
                assert_eq!(never.marginal_cost.fract(), 0.0);
                assert_eq!(never.num_queries(), 0);
                stalled += never.marginal_cost as usize;
                let ezq = run_episode(&c, goal, PlannerKind::Ezq, &prior, seed, 100).unwrap();
                assert_eq!(ezq.num_queries(), 1);
                assert_eq!(ezq.marginal_cost, 0.5);
                assert_eq!(ezq.final_belief.certain_goal(), Some(goal));
                for q in &ezq.query_log {
                    assert_eq!(q.response, q.query.response_for(goal));
                }
            }
        }
        assert!(stalled > 0);
    }

    #[test]
    fn replays_are_identical() {
        let s = setup(opposed());
        let c = ctx(&s, 0.5, 0.1);
        for kind in PlannerKind::ALL {
            let a = run_episode(&c, 1, kind, &Belief::uniform(2), 42, 100).unwrap();
            let b = run_episode(&c, 1, kind, &Belief::uniform(2), 42, 100).unwrap();
            assert_eq!(a, b);
            assert!(a.total_cost >= a.optimal_cost);
        }
    }

    #[test]
    fn prohibitive_queries_match_never_query() {
        let s = setup(opposed());
        let c = ctx(&s, 1e9, 1e9);
        for kind in PlannerKind::ALL {
            if matches!(kind, PlannerKind::BaselineRandom | PlannerKind::BlToolbox) {
                continue;
            }
            for seed in 0..5 {
                let r = run_episode(&c, 0, kind, &Belief::uniform(2), seed, 100).unwrap();
                let n = run_episode(&c, 0, PlannerKind::NeverQuery, &Belief::uniform(2), seed, 100)
                    .unwrap();
                assert_eq!(r.total_cost, n.total_cost, "{kind}");
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = setup(opposed());
        let c = ctx(&s, 0.5, 0.1);
        assert!(matches!(
            run_episode(&c, 0, PlannerKind::Ezq, &Belief::uniform(2), 0, 5),
            Err(SimError::StepCap { .. })
        ));
        assert!(matches!(
            run_episode(&c, 0, PlannerKind::Ezq, &Belief::point_mass(2, 1), 0, 50),
            Err(SimError::ImpossibleGoal { goal: 0 })
        ));
        let slow = (0..50)
            .find(|&seed| {
                run_episode(&c, 0, PlannerKind::NeverQuery, &Belief::uniform(2), seed, 100)
                    .unwrap()
                    .timesteps
                    > 9
            })
            .unwrap();
        assert!(matches!(
            run_episode(&c, 0, PlannerKind::NeverQuery, &Belief::uniform(2), slow, 9),
            Err(SimError::Livelock { cap: 9 })
        ));
    }
}
