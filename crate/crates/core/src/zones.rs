//! Worst-case distinctiveness and the querying zones.
//!
//! All thresholds are timesteps counted from "now": `t = 1` is the next joint
//! action. For a pair of worker goals:
//!
//! * `Z_I = { t | t <= info_until }` where `info_until` is the worst-case
//!   divergence point of the worker's URO policies,
//! * `Z_B = { t | t >= branch_from }` where `branch_from` is the worst-case
//!   divergence point of the fetcher's URO policies,
//! * `Z_Q = Z_I ∩ Z_B`,
//! * `eZ_I = { t | t <= EDP(worker, pi_g1 | pi_g2) }` and
//!   `eZ_Q = Z_B ∩ eZ_I` on integer timesteps.
//!
//! The expected branching zone coincides with `Z_B` when the fetcher acts
//! optimally for what it knows, which is the case for every planner here, so
//! only the worst-case `branch_from` is computed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    DomainInstance, FetcherSpace, FetcherState, StateSpace, StochasticPolicy, UroPolicies,
    WorkerSpace,
};
use crate::edp::{edp_policy_evaluation, EdpConfig, EdpError, EdpTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZoneError {
    #[error("policies for goals {g1} and {g2} never diverge from state {state}")]
    Unbounded { g1: usize, g2: usize, state: usize },
    #[error("goal pair ({0}, {1}) is not a pair of distinct valid goals")]
    InvalidPair(usize, usize),
    #[error(transparent)]
    Edp(#[from] EdpError),
    #[error("inconsistent zone tables: {0}")]
    Inconsistent(String),
}

/// Closed integer interval of timesteps; empty when `first > last`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeInterval {
    pub first: u32,
    pub last: u32,
}

impl TimeInterval {
    pub const EMPTY: TimeInterval = TimeInterval { first: 1, last: 0 };

    pub fn new(first: u32, last: u32) -> Self {
        TimeInterval { first, last }
    }

    pub fn is_empty(&self) -> bool {
        self.first > self.last
    }

    pub fn len(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            (self.last - self.first + 1) as usize
        }
    }

    pub fn contains(&self, t: u32) -> bool {
        self.first <= t && t <= self.last
    }
}

/// Number of integer timesteps covered by the union of `intervals`.
pub fn union_len(intervals: impl IntoIterator<Item = TimeInterval>) -> usize {
    let mut v: Vec<TimeInterval> = intervals.into_iter().filter(|i| !i.is_empty()).collect();
    v.sort_unstable_by_key(|i| i.first);
    let mut total = 0usize;
    let mut covered_to: Option<u32> = None;
    for iv in v {
        let start = match covered_to {
            Some(c) if c >= iv.first => c + 1,
            _ => iv.first,
        };
        if start <= iv.last {
            total += (iv.last - start + 1) as usize;
            covered_to = Some(iv.last);
        }
    }
    total
}

#[derive(Clone, Copy)]
enum Mark {
    Unvisited,
    InProgress,
    Done(u32),
}

fn wcd_rec(
    space: &impl StateSpace,
    pi1: &StochasticPolicy,
    pi2: &StochasticPolicy,
    state: usize,
    memo: &mut [Mark],
) -> Result<u32, ZoneError> {
    match memo[state] {
        Mark::Done(v) => return Ok(v),
        Mark::InProgress => {
            return Err(ZoneError::Unbounded {
                g1: pi1.goal(),
                g2: pi2.goal(),
                state,
            })
        }
        Mark::Unvisited => {}
    }
    memo[state] = Mark::InProgress;
    let allowed = pi1.dist(state);
    let mut longest = 0;
    for a in pi2.dist(state).actions().filter(|&a| allowed.supports(a)) {
        let next = space.successor(state, a).ok_or_else(|| {
            ZoneError::Inconsistent(format!("shared action {a} inapplicable in state {state}"))
        })?;
        longest = longest.max(wcd_rec(space, pi1, pi2, next, memo)?);
    }
    let v = longest + 1;
    memo[state] = Mark::Done(v);
    Ok(v)
}

/// Worst-case divergence point of `pi1` from trajectories in `pi2`'s support,
/// starting at `state`.
pub fn wcd_dp(
    space: &impl StateSpace,
    pi1: &StochasticPolicy,
    pi2: &StochasticPolicy,
    state: usize,
) -> Result<u32, ZoneError> {
    let mut memo = vec![Mark::Unvisited; space.num_states()];
    wcd_rec(space, pi1, pi2, state, &mut memo)
}

/// Worst-case divergence points for an unordered goal pair over the leading
/// `len` states of a space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WcdTable {
    pub g1: usize,
    pub g2: usize,
    pub values: Vec<u32>,
}

impl WcdTable {
    pub fn get(&self, state: usize) -> u32 {
        self.values[state]
    }

    /// Combines both orderings of the pair with `combine` (max for the
    /// worker, min for the fetcher).
    pub fn compute(
        space: &impl StateSpace,
        pi1: &StochasticPolicy,
        pi2: &StochasticPolicy,
        len: usize,
        combine: fn(u32, u32) -> u32,
    ) -> Result<Self, ZoneError> {
        let mut memo12 = vec![Mark::Unvisited; space.num_states()];
        let mut memo21 = vec![Mark::Unvisited; space.num_states()];
        let values = (0..len)
            .map(|s| {
                Ok(combine(
                    wcd_rec(space, pi1, pi2, s, &mut memo12)?,
                    wcd_rec(space, pi2, pi1, s, &mut memo21)?,
                ))
            })
            .collect::<Result<_, ZoneError>>()?;
        Ok(WcdTable {
            g1: pi1.goal(),
            g2: pi2.goal(),
            values,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneThresholds {
    pub g1: usize,
    pub g2: usize,
    /// Upper edge of `Z_I`.
    pub info_until: u32,
    /// Lower edge of `Z_B`.
    pub branch_from: u32,
    /// Upper edge of `eZ_I`, an EDP value.
    pub expected_info_until: f64,
}

impl ZoneThresholds {
    pub fn zone_querying(&self) -> TimeInterval {
        TimeInterval::new(self.branch_from, self.info_until)
    }

    pub fn expected_zone_querying(&self) -> TimeInterval {
        expected_zone_querying(self)
    }
}

fn check_pair(instance: &DomainInstance, g1: usize, g2: usize) -> Result<(), ZoneError> {
    let n = instance.num_stations();
    if g1 == g2 || g1 >= n || g2 >= n {
        return Err(ZoneError::InvalidPair(g1, g2));
    }
    Ok(())
}

/// Upper edge of `Z_I` for the worker at `worker_pos`: the larger worst-case
/// divergence point over both orderings of the pair.
pub fn zone_information(
    instance: &DomainInstance,
    policies: &UroPolicies,
    worker_pos: crate::domain::Coord,
    g1: usize,
    g2: usize,
) -> Result<u32, ZoneError> {
    check_pair(instance, g1, g2)?;
    let space = WorkerSpace::new(instance);
    let s = space.index(worker_pos);
    let (p1, p2) = (&policies.worker[g1], &policies.worker[g2]);
    Ok(wcd_dp(&space, p1, p2, s)?.max(wcd_dp(&space, p2, p1, s)?))
}

/// Lower edge of `Z_B` for the fetcher in `fetcher_state`: the smaller
/// worst-case divergence point over both orderings of the pair.
pub fn zone_branching(
    instance: &DomainInstance,
    policies: &UroPolicies,
    fetcher_state: FetcherState,
    g1: usize,
    g2: usize,
) -> Result<u32, ZoneError> {
    check_pair(instance, g1, g2)?;
    let space = FetcherSpace::new(instance);
    let s = space.index(fetcher_state);
    let (p1, p2) = (&policies.fetcher[g1], &policies.fetcher[g2]);
    Ok(wcd_dp(&space, p1, p2, s)?.min(wcd_dp(&space, p2, p1, s)?))
}

/// Upper edge of `eZ_I(s, g1 | g2)`, read from the table for `(g1, g2)`.
pub fn expected_zone_information(table: &EdpTable, worker_state: usize) -> f64 {
    table.get(worker_state)
}

/// `eZ_Q = { t | branch_from <= t <= floor(expected_info_until) }`.
pub fn expected_zone_querying(thresholds: &ZoneThresholds) -> TimeInterval {
    let last = thresholds.expected_info_until.floor();
    if last < 1.0 {
        return TimeInterval::EMPTY;
    }
    TimeInterval::new(thresholds.branch_from, last as u32)
}

/// Index of the ordered pair `(i, j)`, `i != j`, among `n * (n - 1)` pairs.
pub fn ordered_pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i != j && i < n && j < n);
    i * (n - 1) + if j < i { j } else { j - 1 }
}

/// Index of the unordered pair `{i, j}` among `n * (n - 1) / 2` pairs.
pub fn unordered_pair_index(n: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    debug_assert!(a != b && b < n);
    a * n - a * (a + 1) / 2 + (b - a - 1)
}

/// Everything the online planners read: EDP tables for every ordered pair of
/// worker goals and worst-case divergence tables for every unordered pair on
/// both the worker side (all cells) and the fetcher side (empty-handed
/// cells).
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneTables {
    num_goals: usize,
    cells: usize,
    edp: Vec<EdpTable>,
    worker_wcd: Vec<WcdTable>,
    fetcher_wcd: Vec<WcdTable>,
}

impl ZoneTables {
    pub fn build(
        instance: &DomainInstance,
        policies: &UroPolicies,
        config: &EdpConfig,
    ) -> Result<Self, ZoneError> {
        let n = instance.num_stations();
        let cells = instance.num_cells();
        let worker = WorkerSpace::new(instance);
        let fetcher = FetcherSpace::new(instance);

        let ordered: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        let unordered: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();

        let edp = ordered
            .par_iter()
            .map(|&(i, j)| {
                edp_policy_evaluation(&worker, &policies.worker[i], &policies.worker[j], config)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let worker_wcd = unordered
            .par_iter()
            .map(|&(i, j)| {
                WcdTable::compute(
                    &worker,
                    &policies.worker[i],
                    &policies.worker[j],
                    cells,
                    u32::max,
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        let fetcher_wcd = unordered
            .par_iter()
            .map(|&(i, j)| {
                WcdTable::compute(
                    &fetcher,
                    &policies.fetcher[i],
                    &policies.fetcher[j],
                    cells,
                    u32::min,
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ZoneTables {
            num_goals: n,
            cells,
            edp,
            worker_wcd,
            fetcher_wcd,
        })
    }

    /// Reassembles tables, checking that they cover every pair in order.
    pub fn from_parts(
        num_goals: usize,
        cells: usize,
        edp: Vec<EdpTable>,
        worker_wcd: Vec<WcdTable>,
        fetcher_wcd: Vec<WcdTable>,
    ) -> Result<Self, ZoneError> {
        let n = num_goals;
        let bad = |msg: String| Err(ZoneError::Inconsistent(msg));
        if n < 2 {
            return bad(format!("{n} goals"));
        }
        if edp.len() != n * (n - 1) {
            return bad(format!("{} EDP tables for {n} goals", edp.len()));
        }
        for (k, t) in edp.iter().enumerate() {
            if t.g1 >= n || t.g2 >= n || t.g1 == t.g2 {
                return bad(format!("EDP table for ({}, {})", t.g1, t.g2));
            }
            if ordered_pair_index(n, t.g1, t.g2) != k {
                return bad(format!("EDP table ({}, {}) out of order", t.g1, t.g2));
            }
            if t.values.len() != cells {
                return bad(format!("EDP table ({}, {}) has {} cells", t.g1, t.g2, t.values.len()));
            }
        }
        for (name, tables) in [("worker", &worker_wcd), ("fetcher", &fetcher_wcd)] {
            if tables.len() != n * (n - 1) / 2 {
                return bad(format!("{} {name} WCD tables for {n} goals", tables.len()));
            }
            for (k, t) in tables.iter().enumerate() {
                if t.g1 >= t.g2 || t.g2 >= n || unordered_pair_index(n, t.g1, t.g2) != k {
                    return bad(format!("{name} WCD table ({}, {}) out of order", t.g1, t.g2));
                }
                if t.values.len() != cells {
                    return bad(format!("{name} WCD table has {} cells", t.values.len()));
                }
            }
        }
        Ok(ZoneTables {
            num_goals,
            cells,
            edp,
            worker_wcd,
            fetcher_wcd,
        })
    }

    pub fn num_goals(&self) -> usize {
        self.num_goals
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn edp_tables(&self) -> &[EdpTable] {
        &self.edp
    }

    pub fn worker_wcd_tables(&self) -> &[WcdTable] {
        &self.worker_wcd
    }

    pub fn fetcher_wcd_tables(&self) -> &[WcdTable] {
        &self.fetcher_wcd
    }

    /// Table of `EDP(., pi_g1 | pi_g2)`.
    pub fn edp(&self, g1: usize, g2: usize) -> &EdpTable {
        &self.edp[ordered_pair_index(self.num_goals, g1, g2)]
    }

    pub fn info_until(&self, g1: usize, g2: usize, worker_cell: usize) -> u32 {
        self.worker_wcd[unordered_pair_index(self.num_goals, g1, g2)].get(worker_cell)
    }

    /// `branch_from` for an empty-handed fetcher on `fetcher_cell`.
    pub fn branch_from(&self, g1: usize, g2: usize, fetcher_cell: usize) -> u32 {
        self.fetcher_wcd[unordered_pair_index(self.num_goals, g1, g2)].get(fetcher_cell)
    }

    /// Thresholds for the ordered pair `(g1 | g2)`.
    pub fn thresholds(
        &self,
        g1: usize,
        g2: usize,
        worker_cell: usize,
        fetcher_cell: usize,
    ) -> ZoneThresholds {
        ZoneThresholds {
            g1,
            g2,
            info_until: self.info_until(g1, g2, worker_cell),
            branch_from: self.branch_from(g1, g2, fetcher_cell),
            expected_info_until: expected_zone_information(self.edp(g1, g2), worker_cell),
        }
    }
}
