//! Goal-set queries, their prices and their expected value.
//!
//! The value of asking "is your goal in `q`?" is measured in expected blocked
//! timesteps avoided. For a true goal `g` and a set `S` of goals still
//! considered possible, the fetcher expects to be blocked for
//!
//! ```text
//! B(g, S) = | ⋃_{g' ∈ S, g' ≠ g} eZ_Q(s, g' | g) |
//! ```
//!
//! timesteps. Under truthful answers the response is a function of the true
//! goal, so the value collapses to
//!
//! ```text
//! V(q) = Σ_{g ∈ S} P(g) · [ B(g, S) − B(g, S ∩ resp(g, q)) ]
//! ```
//!
//! with `resp(g, q) = q` when `g ∈ q` and its complement otherwise.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::Belief;
use crate::zones::{union_len, TimeInterval, ZoneTables, ZoneThresholds};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("a query must name at least one station")]
    Empty,
    #[error("cost parameters must be finite and non-negative (base {base}, per station {per_station})")]
    InvalidCost { base: f64, per_station: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Response {
    Yes,
    No,
}

/// "Is your goal one of these stations?"
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Query {
    stations: BTreeSet<usize>,
}

impl Query {
    pub fn new(stations: impl IntoIterator<Item = usize>) -> Result<Self, QueryError> {
        let stations: BTreeSet<usize> = stations.into_iter().collect();
        if stations.is_empty() {
            return Err(QueryError::Empty);
        }
        Ok(Query { stations })
    }

    pub fn contains(&self, station: usize) -> bool {
        self.stations.contains(&station)
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.stations.iter().copied()
    }

    /// Truthful answer of a worker whose goal is `goal`.
    pub fn response_for(&self, goal: usize) -> Response {
        if self.contains(goal) {
            Response::Yes
        } else {
            Response::No
        }
    }
}

impl std::fmt::Display for Query {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<String> = self.stations.iter().map(|s| s.to_string()).collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

/// How a query timestep is charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryCharge {
    /// The query price replaces the ontic cost of the timestep.
    #[default]
    Replace,
    /// The query price is added to the ontic cost of the timestep.
    Additive,
}

/// Ontic actions cost 1 per joint timestep; queries cost a base price plus a
/// price per station named.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub query_base: f64,
    pub per_station: f64,
    #[serde(default)]
    pub charge: QueryCharge,
}

impl CostModel {
    pub const ONTIC_COST: f64 = 1.0;

    pub fn new(query_base: f64, per_station: f64) -> Result<Self, QueryError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(query_base) || !ok(per_station) {
            return Err(QueryError::InvalidCost {
                base: query_base,
                per_station,
            });
        }
        Ok(CostModel {
            query_base,
            per_station,
            charge: QueryCharge::Replace,
        })
    }

    pub fn with_charge(self, charge: QueryCharge) -> Self {
        CostModel { charge, ..self }
    }

    pub fn query_cost(&self, q: &Query) -> f64 {
        query_cost(self, q)
    }

    /// Cost booked for a timestep spent on `q`.
    pub fn query_timestep_cost(&self, q: &Query) -> f64 {
        match self.charge {
            QueryCharge::Replace => self.query_cost(q),
            QueryCharge::Additive => self.query_cost(q) + Self::ONTIC_COST,
        }
    }
}

pub fn query_cost(model: &CostModel, q: &Query) -> f64 {
    model.query_base + q.len() as f64 * model.per_station
}

/// Zone thresholds among a set of goals at one decision point, indexed by
/// position in [`ZoneSnapshot::goals`].
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneSnapshot {
    goals: Vec<usize>,
    info_until: Vec<u32>,
    branch_from: Vec<u32>,
    /// `edp[i * k + j] = EDP(worker, pi_goals[i] | pi_goals[j])`.
    edp: Vec<f64>,
}

impl ZoneSnapshot {
    /// Reads thresholds for every pair of `goals` from precomputed tables.
    /// `fetcher_cell` is `None` when the fetcher carries a tool, in which case
    /// no pair is ever in its branching zone.
    pub fn capture(
        tables: &ZoneTables,
        goals: &[usize],
        worker_cell: usize,
        fetcher_cell: Option<usize>,
    ) -> Self {
        Self::from_thresholds(goals, |g1, g2| {
            let mut th = match fetcher_cell {
                Some(fc) => tables.thresholds(g1, g2, worker_cell, fc),
                None => tables.thresholds(g1, g2, worker_cell, 0),
            };
            if fetcher_cell.is_none() {
                th.branch_from = u32::MAX;
            }
            th
        })
    }

    /// Builds a snapshot from a threshold oracle over ordered pairs.
    pub fn from_thresholds(goals: &[usize], mut th: impl FnMut(usize, usize) -> ZoneThresholds) -> Self {
        let k = goals.len();
        let mut info_until = vec![0; k * k];
        let mut branch_from = vec![u32::MAX; k * k];
        let mut edp = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                let t = th(goals[i], goals[j]);
                info_until[i * k + j] = t.info_until;
                branch_from[i * k + j] = t.branch_from;
                edp[i * k + j] = t.expected_info_until;
            }
        }
        ZoneSnapshot {
            goals: goals.to_vec(),
            info_until,
            branch_from,
            edp,
        }
    }

    pub fn goals(&self) -> &[usize] {
        &self.goals
    }

    pub fn len(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }

    pub fn local_index(&self, station: usize) -> Option<usize> {
        self.goals.iter().position(|&g| g == station)
    }

    pub fn thresholds(&self, i: usize, j: usize) -> ZoneThresholds {
        let k = self.len();
        ZoneThresholds {
            g1: self.goals[i],
            g2: self.goals[j],
            info_until: self.info_until[i * k + j],
            branch_from: self.branch_from[i * k + j],
            expected_info_until: self.edp[i * k + j],
        }
    }

    /// True when some pair of goals has `t ∈ Z_Q`.
    pub fn in_zone_querying(&self, t: u32) -> bool {
        let k = self.len();
        (0..k).any(|i| {
            (i + 1..k).any(|j| {
                self.branch_from[i * k + j] <= t && t <= self.info_until[i * k + j]
            })
        })
    }

    /// Local index pairs `(i, j)`, `i < j`, with `t ∈ Z_B`.
    pub fn branching_pairs(&self, t: u32) -> Vec<(usize, usize)> {
        let k = self.len();
        (0..k)
            .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
            .filter(|&(i, j)| self.branch_from[i * k + j] <= t)
            .collect()
    }

    /// `eZ_Q(s, other | truth)` for local indices.
    pub fn expected_interval(&self, other: usize, truth: usize) -> TimeInterval {
        self.thresholds(other, truth).expected_zone_querying()
    }

    fn blocked_local(&self, truth: usize, members: impl Iterator<Item = usize>) -> f64 {
        union_len(
            members
                .filter(|&j| j != truth)
                .map(|j| self.expected_interval(j, truth)),
        ) as f64
    }
}

/// `B(goal, within)`: expected blocked timesteps if the worker's goal is
/// `goal` and the fetcher still considers `within` possible. Stations not in
/// the snapshot are ignored.
pub fn expected_blocked_steps(snapshot: &ZoneSnapshot, goal: usize, within: &[usize]) -> f64 {
    let Some(truth) = snapshot.local_index(goal) else {
        return 0.0;
    };
    snapshot.blocked_local(truth, within.iter().filter_map(|&s| snapshot.local_index(s)))
}

/// Evaluates query values against one snapshot and belief, caching the
/// no-query blocked steps for every goal.
#[derive(Debug, Clone)]
pub struct QueryEvaluator<'a> {
    snapshot: &'a ZoneSnapshot,
    /// Local indices of snapshot goals with positive probability.
    support: Vec<usize>,
    probs: Vec<f64>,
    base: Vec<f64>,
}

impl<'a> QueryEvaluator<'a> {
    pub fn new(snapshot: &'a ZoneSnapshot, belief: &Belief) -> Self {
        let support: Vec<usize> = (0..snapshot.len())
            .filter(|&i| belief.prob(snapshot.goals[i]) > 0.0)
            .collect();
        let probs = (0..snapshot.len())
            .map(|i| belief.prob(snapshot.goals[i]))
            .collect();
        let base = (0..snapshot.len())
            .map(|i| {
                if support.contains(&i) {
                    snapshot.blocked_local(i, support.iter().copied())
                } else {
                    0.0
                }
            })
            .collect();
        QueryEvaluator {
            snapshot,
            support,
            probs,
            base,
        }
    }

    pub fn snapshot(&self) -> &ZoneSnapshot {
        self.snapshot
    }

    /// Expected blocked steps without querying, `Σ P(g) B(g, S)`.
    pub fn expected_blocked(&self) -> f64 {
        self.support.iter().map(|&i| self.probs[i] * self.base[i]).sum()
    }

    /// Value of the query whose members are the local indices with
    /// `member[i] == true`.
    pub fn value_local(&self, member: &[bool]) -> f64 {
        if self.support.len() < 2 {
            return 0.0;
        }
        self.support
            .iter()
            .map(|&g| {
                let side = member[g];
                let after = self
                    .snapshot
                    .blocked_local(g, self.support.iter().copied().filter(|&j| member[j] == side));
                self.probs[g] * (self.base[g] - after)
            })
            .sum()
    }

    pub fn value(&self, q: &Query) -> f64 {
        let member: Vec<bool> = self.snapshot.goals.iter().map(|&g| q.contains(g)).collect();
        self.value_local(&member)
    }
}

pub fn value_of_query(q: &Query, belief: &Belief, snapshot: &ZoneSnapshot) -> f64 {
    QueryEvaluator::new(snapshot, belief).value(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn costs() {
        let m = CostModel::new(0.5, 0.1).unwrap();
        let q = Query::new([1, 3, 5]).unwrap();
        assert!((query_cost(&m, &q) - 0.8).abs() < 1e-12);
        let flat = CostModel::new(0.5, 0.0).unwrap();
        assert_eq!(flat.query_cost(&Query::new(0..7).unwrap()), 0.5);
        let steep = CostModel::new(0.5, 0.5).unwrap();
        assert_eq!(steep.query_cost(&Query::new(0..4).unwrap()), 2.5);
        assert_eq!(
            steep.with_charge(QueryCharge::Additive).query_timestep_cost(&Query::new([0]).unwrap()),
            2.0
        );
        assert!(CostModel::new(-0.1, 0.0).is_err());
        assert!(Query::new([]).is_err());
        assert_eq!(Query::new([4, 1]).unwrap().to_string(), "{1,4}");
    }

    /// Snapshot with explicit intervals: `eZ_Q(other | truth)` is
    /// `[branch[other][truth], floor(edp[other][truth])]`.
    fn snapshot(goals: &[usize], branch: &[&[u32]], edp: &[&[f64]]) -> ZoneSnapshot {
        ZoneSnapshot::from_thresholds(goals, |g1, g2| {
            let i = goals.iter().position(|&g| g == g1).unwrap();
            let j = goals.iter().position(|&g| g == g2).unwrap();
            ZoneThresholds {
                g1,
                g2,
                info_until: 20,
                branch_from: branch[i][j],
                expected_info_until: edp[i][j],
            }
        })
    }

    fn three_goal() -> ZoneSnapshot {
        snapshot(
            &[0, 1, 2],
            &[&[0, 4, 7], &[4, 0, 2], &[7, 2, 0]],
            &[&[0.0, 5.4, 7.9], &[3.2, 0.0, 6.0], &[9.5, 4.1, 0.0]],
        )
    }

    #[test]
    fn blocked_steps() {
        let s = three_goal();
        assert_eq!(expected_blocked_steps(&s, 0, &[0]), 0.0);
        // For truth 0: eZ_Q(1|0) = [4,3] empty, eZ_Q(2|0) = [7,9].
        assert_eq!(expected_blocked_steps(&s, 0, &[0, 1, 2]), 3.0);
        // For truth 2: eZ_Q(0|2) = [7,7], eZ_Q(1|2) = [2,6].
        assert_eq!(expected_blocked_steps(&s, 2, &[0, 1, 2]), 6.0);
        let disjoint = snapshot(
            &[0, 1, 2],
            &[&[0, 4, 7], &[4, 0, 7], &[7, 7, 0]],
            &[&[0.0, 5.0, 5.0], &[5.0, 0.0, 5.0], &[5.5, 7.2, 0.0]],
        );
        // eZ_Q(0|1) = {4,5}, eZ_Q(2|1) = {7}.
        assert_eq!(expected_blocked_steps(&disjoint, 1, &[0, 1, 2]), 3.0);
    }

    #[test]
    fn blocked_steps_match_enumeration() {
        let s = three_goal();
        for truth in 0..3 {
            let mut covered = BTreeSet::new();
            for other in (0..3).filter(|&o| o != truth) {
                let th = s.thresholds(other, truth);
                let last = th.expected_info_until.floor() as u32;
                covered.extend(th.branch_from..=last);
            }
            assert_eq!(
                expected_blocked_steps(&s, truth, &[0, 1, 2]),
                covered.len() as f64
            );
        }
    }

    #[test]
    fn trivial_values() {
        let s = three_goal();
        let point = Belief::point_mass(3, 1);
        let uniform = Belief::uniform(3);
        for mask in 1u32..8 {
            let q = Query::new((0..3).filter(|g| mask >> g & 1 == 1)).unwrap();
            assert_eq!(value_of_query(&q, &point, &s), 0.0);
        }
        assert_eq!(value_of_query(&Query::new(0..3).unwrap(), &uniform, &s), 0.0);
        let v = value_of_query(&Query::new([2]).unwrap(), &uniform, &s);
        // Asking about {2}: truths 0 and 1 keep {0,1}, truth 2 is isolated.
        // B drops 3 -> 0, 4 -> 2 and 6 -> 0.
        let expected = (3.0 + 2.0 + 6.0) / 3.0;
        assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
    }

    fn arb_snapshot() -> impl Strategy<Value = (ZoneSnapshot, Belief)> {
        let k = 5;
        (
            prop::collection::vec(1u32..8, k * k),
            prop::collection::vec(1.0f64..9.0, k * k),
            prop::collection::vec(0.0f64..1.0, k),
        )
            .prop_filter_map("mass", move |(b, e, w)| {
                let goals: Vec<usize> = (0..k).collect();
                let snap = ZoneSnapshot::from_thresholds(&goals, |g1, g2| ZoneThresholds {
                    g1,
                    g2,
                    info_until: 20,
                    branch_from: b[g1.min(g2) * k + g1.max(g2)],
                    expected_info_until: e[g1 * k + g2],
                });
                let total: f64 = w.iter().sum();
                (total > 0.0).then(|| {
                    (snap, Belief::new(w.iter().map(|x| x / total).collect()).unwrap())
                })
            })
    }

    proptest! {
        #[test]
        fn value_bounds_and_symmetry((snap, belief) in arb_snapshot(), mask in 1u32..31) {
            let eval = QueryEvaluator::new(&snap, &belief);
            let q = Query::new((0..5).filter(|g| mask >> g & 1 == 1)).unwrap();
            let v = eval.value(&q);
            prop_assert!(v >= -1e-12);
            prop_assert!(v <= eval.expected_blocked() + 1e-12);

            let complement: Vec<usize> = belief
                .support()
                .iter()
                .copied()
                .filter(|g| !q.contains(*g))
                .collect();
            if !complement.is_empty() {
                let vc = eval.value(&Query::new(complement).unwrap());
                prop_assert!((v - vc).abs() < 1e-9);
            }
        }

        #[test]
        fn zero_probability_station_changes_nothing((snap, belief) in arb_snapshot(), mask in 1u32..31) {
            let q = Query::new((0..5).filter(|g| mask >> g & 1 == 1)).unwrap();
            let v = value_of_query(&q, &belief, &snap);
            let mut probs = belief.probs().to_vec();
            probs.push(0.0);
            let wider = Belief::new(probs).unwrap();
            let extended = Query::new(q.iter().chain([5])).unwrap();
            prop_assert!((value_of_query(&extended, &wider, &snap) - v).abs() < 1e-12);
            let m = CostModel::new(0.5, 0.1).unwrap();
            prop_assert!(m.query_cost(&extended) > m.query_cost(&q));
        }
    }
}
