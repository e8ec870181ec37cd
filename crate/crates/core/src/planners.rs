//! Fetcher decision rules.
//!
//! Every planner falls back to the same ontic rule: take an action that is
//! optimal for every goal still in the belief support, or `Noop` when no such
//! action exists. Planners differ only in when and what they ask.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::domain::{Coord, DomainInstance, FetcherSpace, FetcherState, OnticAction, UroPolicies};
use crate::optim::{ga_optimize, solve_query_objective, BitVector, GaConfig};
use crate::query::{CostModel, Query, QueryEvaluator, ZoneSnapshot};
use crate::zones::ZoneTables;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Ontic(OnticAction),
    Ask(Query),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    Ezq,
    NeverQuery,
    BaselineRandom,
    BlCostProb,
    BlToolbox,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 5] = [
        PlannerKind::Ezq,
        PlannerKind::NeverQuery,
        PlannerKind::BaselineRandom,
        PlannerKind::BlCostProb,
        PlannerKind::BlToolbox,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Ezq => "ezq",
            PlannerKind::NeverQuery => "never_query",
            PlannerKind::BaselineRandom => "baseline_random",
            PlannerKind::BlCostProb => "bl_cost_prob",
            PlannerKind::BlToolbox => "bl_toolbox",
        }
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PlannerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown planner '{s}'"))
    }
}

impl std::fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Immutable inputs shared by every decision in an episode.
#[derive(Debug, Clone, Copy)]
pub struct PlanningContext<'a> {
    pub instance: &'a DomainInstance,
    pub policies: &'a UroPolicies,
    pub tables: &'a ZoneTables,
    pub cost: CostModel,
    pub ga: GaConfig,
}

/// What the fetcher sees when it decides. `t` is the relative timestep the
/// zones are tested at; `1` is the coming joint action.
#[derive(Debug, Clone, Copy)]
pub struct DecisionState<'a> {
    pub worker: Coord,
    pub fetcher: FetcherState,
    pub belief: &'a Belief,
    pub t: u32,
}

/// An action with positive URO probability for every supported goal, first
/// in action order, if one exists.
pub fn known_ontic_action(
    instance: &DomainInstance,
    policies: &UroPolicies,
    fetcher: FetcherState,
    belief: &Belief,
) -> Option<OnticAction> {
    let state = FetcherSpace::new(instance).index(fetcher);
    let support = belief.support();
    let first = policies.fetcher[*support.first()?].dist(state);
    first
        .actions()
        .find(|&a| support.iter().all(|&g| policies.fetcher[g].prob(state, a) > 0.0))
}

fn ontic(ctx: &PlanningContext, s: &DecisionState) -> Decision {
    Decision::Ontic(
        known_ontic_action(ctx.instance, ctx.policies, s.fetcher, s.belief)
            .unwrap_or(OnticAction::Noop),
    )
}

/// Zone thresholds among the supported goals at the current positions.
pub fn snapshot(ctx: &PlanningContext, s: &DecisionState) -> ZoneSnapshot {
    let fetcher_cell = match s.fetcher.held {
        None => Some(ctx.instance.cell_index(s.fetcher.pos)),
        Some(_) => None,
    };
    ZoneSnapshot::capture(
        ctx.tables,
        s.belief.support(),
        ctx.instance.cell_index(s.worker),
        fetcher_cell,
    )
}

fn query_from_local(snap: &ZoneSnapshot, bits: &BitVector) -> Option<Query> {
    Query::new(bits.ones().map(|i| snap.goals()[i])).ok()
}

/// Queries only inside some `Z_Q`, choosing the query by GA over subsets of
/// the support with fitness `value - cost`, and only when that is positive.
pub fn ezq_decide(ctx: &PlanningContext, s: &DecisionState, ga_seed: u64) -> Decision {
    if s.belief.support().len() < 2 {
        return ontic(ctx, s);
    }
    let snap = snapshot(ctx, s);
    if !snap.in_zone_querying(s.t) {
        return ontic(ctx, s);
    }
    let eval = QueryEvaluator::new(&snap, s.belief);
    let cost = ctx.cost;
    let net = |bits: &BitVector| {
        let price = cost.query_base + bits.count_ones() as f64 * cost.per_station;
        eval.value_local(bits.bits()) - price
    };
    let config = ctx.ga.with_seed(ctx.ga.seed ^ ga_seed);
    let (best, best_net) = ga_optimize(net, snap.len(), &config).expect("validated GA config");
    match query_from_local(&snap, &best) {
        Some(q) if best_net > 0.0 => Decision::Ask(q),
        _ => ontic(ctx, s),
    }
}

pub fn never_query_decide(ctx: &PlanningContext, s: &DecisionState) -> Decision {
    ontic(ctx, s)
}

/// Inside some `Z_Q`, asks about a uniformly random nonempty proper subset of
/// the support.
pub fn baseline_random_decide(
    ctx: &PlanningContext,
    s: &DecisionState,
    rng: &mut ChaCha8Rng,
) -> Decision {
    let support = s.belief.support();
    if support.len() < 2 || !snapshot(ctx, s).in_zone_querying(s.t) {
        return ontic(ctx, s);
    }
    loop {
        let pick: Vec<usize> = support.iter().copied().filter(|_| rng.gen::<bool>()).collect();
        if !pick.is_empty() && pick.len() < support.len() {
            return Decision::Ask(Query::new(pick).expect("nonempty"));
        }
    }
}

/// Inside some `Z_Q`, asks the maximiser of the XOR objective over the pairs
/// currently in their branching zone, priced per station.
pub fn bl_cost_prob_decide(ctx: &PlanningContext, s: &DecisionState) -> Decision {
    if s.belief.support().len() < 2 {
        return ontic(ctx, s);
    }
    let snap = snapshot(ctx, s);
    if !snap.in_zone_querying(s.t) {
        return ontic(ctx, s);
    }
    let pairs = snap.branching_pairs(s.t);
    let probs: Vec<f64> = snap.goals().iter().map(|&g| s.belief.prob(g)).collect();
    let (best, value) = solve_query_objective(&pairs, &probs, ctx.cost.per_station);
    match query_from_local(&snap, &best) {
        Some(q) if value > 0.0 => Decision::Ask(q),
        _ => ontic(ctx, s),
    }
}

/// Inside some `Z_Q`, groups supported goals by each fetcher action that is
/// optimal for them and asks about the group of median size.
pub fn bl_toolbox_decide(ctx: &PlanningContext, s: &DecisionState) -> Decision {
    let support = s.belief.support();
    if support.len() < 2 || !snapshot(ctx, s).in_zone_querying(s.t) {
        return ontic(ctx, s);
    }
    match toolbox_query(ctx.instance, ctx.policies, s.fetcher, s.belief) {
        Some(q) => Decision::Ask(q),
        None => ontic(ctx, s),
    }
}

/// The median-size informative action group, ties toward the smaller group
/// and then the earlier action.
pub fn toolbox_query(
    instance: &DomainInstance,
    policies: &UroPolicies,
    fetcher: FetcherState,
    belief: &Belief,
) -> Option<Query> {
    let state = FetcherSpace::new(instance).index(fetcher);
    let support = belief.support();
    let mut groups: BTreeMap<OnticAction, Vec<usize>> = BTreeMap::new();
    for &g in support {
        for a in policies.fetcher[g].dist(state).actions() {
            groups.entry(a).or_default().push(g);
        }
    }
    let mut cells: Vec<(usize, OnticAction, Vec<usize>)> = Vec::new();
    for (a, goals) in groups {
        if goals.len() < support.len() && !cells.iter().any(|c| c.2 == goals) {
            cells.push((goals.len(), a, goals));
        }
    }
    if cells.is_empty() {
        return None;
    }
    cells.sort_by_key(|c| (c.0, c.1));
    let median = cells.swap_remove((cells.len() - 1) / 2);
    Query::new(median.2).ok()
}

/// Dispatches to the planner's rule. `rng` is the planner's own stream; only
/// the randomised planners draw from it.
pub fn decide(
    kind: PlannerKind,
    ctx: &PlanningContext,
    s: &DecisionState,
    rng: &mut ChaCha8Rng,
) -> Decision {
    match kind {
        PlannerKind::Ezq => {
            let seed = rng.gen::<u64>();
            ezq_decide(ctx, s, seed)
        }
        PlannerKind::NeverQuery => never_query_decide(ctx, s),
        PlannerKind::BaselineRandom => baseline_random_decide(ctx, s, rng),
        PlannerKind::BlCostProb => bl_cost_prob_decide(ctx, s),
        PlannerKind::BlToolbox => bl_toolbox_decide(ctx, s),
    }
}
