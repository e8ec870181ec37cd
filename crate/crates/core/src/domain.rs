//! The tool-fetching grid world.
//!
//! A worker walks to one of several stations; the fetcher must pick up that
//! station's tool from its toolbox and bring it to the station. The grid is
//! obstacle-free, transitions are deterministic and both agents may share a
//! cell.
//!
//! Both agents are modelled by uniformly-random-optimal (URO) policies: the
//! probability of an action is the fraction of minimal-cost plans to the goal
//! that begin with it. Policies are tabulated over an indexed state space
//! (see [`StateSpace`]) so that divergence computations can be written once
//! for any agent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("coordinate ({x}, {y}) lies outside the {width}x{height} grid")]
    OutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("station index {0} is out of range")]
    InvalidGoal(usize),
    #[error("illegal transition: {0}")]
    IllegalTransition(String),
}

/// A grid cell. `x` is the column and `y` the row, both 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub x: usize,
    pub y: usize,
}

impl Coord {
    pub const fn new(x: usize, y: usize) -> Self {
        Coord { x, y }
    }

    pub fn manhattan(self, other: Coord) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

impl std::fmt::Display for Coord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// World-changing actions. The declaration order is the global tie-break
/// order used by every planner: N, S, E, W, Pickup, Noop.
///
/// `MoveN` increases `y`, `MoveE` increases `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OnticAction {
    MoveN,
    MoveS,
    MoveE,
    MoveW,
    /// Pick up the tool belonging to the given station.
    Pickup(usize),
    Noop,
}

pub const MOVES: [OnticAction; 4] = [
    OnticAction::MoveN,
    OnticAction::MoveS,
    OnticAction::MoveE,
    OnticAction::MoveW,
];

impl OnticAction {
    fn delta(self) -> Option<(isize, isize)> {
        match self {
            OnticAction::MoveN => Some((0, 1)),
            OnticAction::MoveS => Some((0, -1)),
            OnticAction::MoveE => Some((1, 0)),
            OnticAction::MoveW => Some((-1, 0)),
            _ => None,
        }
    }

    pub fn is_move(self) -> bool {
        self.delta().is_some()
    }
}

impl std::fmt::Display for OnticAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OnticAction::MoveN => write!(f, "N"),
            OnticAction::MoveS => write!(f, "S"),
            OnticAction::MoveE => write!(f, "E"),
            OnticAction::MoveW => write!(f, "W"),
            OnticAction::Pickup(i) => write!(f, "Pickup({i})"),
            OnticAction::Noop => write!(f, "Noop"),
        }
    }
}

/// Plain description of an instance, used for construction and serialization.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InstanceLayout {
    pub width: usize,
    pub height: usize,
    pub stations: Vec<Coord>,
    pub toolboxes: Vec<Coord>,
    /// `tool_of[i]` is the toolbox holding station `i`'s tool.
    pub tool_of: Vec<usize>,
    pub worker_start: Coord,
    pub fetcher_start: Coord,
}

/// A validated, immutable tool-fetching world.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "InstanceLayout", into = "InstanceLayout")]
pub struct DomainInstance {
    layout: InstanceLayout,
}

impl TryFrom<InstanceLayout> for DomainInstance {
    type Error = DomainError;

    fn try_from(layout: InstanceLayout) -> Result<Self, Self::Error> {
        DomainInstance::new(layout)
    }
}

impl From<DomainInstance> for InstanceLayout {
    fn from(instance: DomainInstance) -> Self {
        instance.layout
    }
}

fn has_duplicates(coords: &[Coord]) -> bool {
    let mut sorted = coords.to_vec();
    sorted.sort_unstable();
    sorted.windows(2).any(|w| w[0] == w[1])
}

impl DomainInstance {
    pub fn new(layout: InstanceLayout) -> Result<Self, DomainError> {
        let invalid = |msg: String| Err(DomainError::InvalidInstance(msg));
        if layout.width == 0 || layout.height == 0 {
            return invalid("grid must have at least one cell".into());
        }
        if layout.stations.len() < 2 {
            return invalid(format!(
                "need at least 2 stations, got {}",
                layout.stations.len()
            ));
        }
        if layout.toolboxes.is_empty() {
            return invalid("need at least one toolbox".into());
        }
        if layout.tool_of.len() != layout.stations.len() {
            return invalid(format!(
                "tool_of has {} entries for {} stations",
                layout.tool_of.len(),
                layout.stations.len()
            ));
        }
        if let Some(&bad) = layout.tool_of.iter().find(|&&t| t >= layout.toolboxes.len()) {
            return invalid(format!("tool_of refers to missing toolbox {bad}"));
        }
        if has_duplicates(&layout.stations) {
            return invalid("two stations share a cell".into());
        }
        if has_duplicates(&layout.toolboxes) {
            return invalid("two toolboxes share a cell".into());
        }
        let all = layout
            .stations
            .iter()
            .chain(&layout.toolboxes)
            .chain([&layout.worker_start, &layout.fetcher_start]);
        for c in all {
            if c.x >= layout.width || c.y >= layout.height {
                return Err(DomainError::OutOfBounds {
                    x: c.x,
                    y: c.y,
                    width: layout.width,
                    height: layout.height,
                });
            }
        }
        Ok(DomainInstance { layout })
    }

    pub fn layout(&self) -> &InstanceLayout {
        &self.layout
    }

    pub fn width(&self) -> usize {
        self.layout.width
    }

    pub fn height(&self) -> usize {
        self.layout.height
    }

    pub fn num_cells(&self) -> usize {
        self.layout.width * self.layout.height
    }

    pub fn num_stations(&self) -> usize {
        self.layout.stations.len()
    }

    pub fn stations(&self) -> &[Coord] {
        &self.layout.stations
    }

    pub fn toolboxes(&self) -> &[Coord] {
        &self.layout.toolboxes
    }

    pub fn station(&self, goal: usize) -> Result<Coord, DomainError> {
        self.layout
            .stations
            .get(goal)
            .copied()
            .ok_or(DomainError::InvalidGoal(goal))
    }

    /// Cell of the toolbox that holds `goal`'s tool.
    pub fn toolbox_for(&self, goal: usize) -> Result<Coord, DomainError> {
        let tb = *self
            .layout
            .tool_of
            .get(goal)
            .ok_or(DomainError::InvalidGoal(goal))?;
        Ok(self.layout.toolboxes[tb])
    }

    pub fn tool_of(&self, goal: usize) -> Option<usize> {
        self.layout.tool_of.get(goal).copied()
    }

    pub fn worker_start(&self) -> Coord {
        self.layout.worker_start
    }

    pub fn fetcher_start(&self) -> Coord {
        self.layout.fetcher_start
    }

    pub fn in_bounds(&self, c: Coord) -> bool {
        c.x < self.layout.width && c.y < self.layout.height
    }

    pub fn check_coord(&self, c: Coord) -> Result<(), DomainError> {
        if self.in_bounds(c) {
            Ok(())
        } else {
            Err(DomainError::OutOfBounds {
                x: c.x,
                y: c.y,
                width: self.layout.width,
                height: self.layout.height,
            })
        }
    }

    /// Row-major cell index.
    pub fn cell_index(&self, c: Coord) -> usize {
        c.y * self.layout.width + c.x
    }

    pub fn coord_of(&self, cell: usize) -> Coord {
        Coord::new(cell % self.layout.width, cell / self.layout.width)
    }

    /// Applies a move action; `None` when it would leave the grid or the
    /// action is not a move.
    pub fn shift(&self, c: Coord, action: OnticAction) -> Option<Coord> {
        let (dx, dy) = action.delta()?;
        let x = c.x.checked_add_signed(dx)?;
        let y = c.y.checked_add_signed(dy)?;
        let next = Coord::new(x, y);
        self.in_bounds(next).then_some(next)
    }

    /// Grid perimeter in cells, used to bound sampled trajectories.
    pub fn perimeter(&self) -> usize {
        2 * (self.layout.width + self.layout.height)
    }
}

/// Navigation state of the fetcher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FetcherState {
    pub pos: Coord,
    /// Station whose tool is being carried.
    pub held: Option<usize>,
}

impl FetcherState {
    pub fn empty_handed(pos: Coord) -> Self {
        FetcherState { pos, held: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentKind {
    Worker,
    Fetcher,
}

/// A probability distribution over ontic actions. Only actions with positive
/// probability are stored, sorted in action order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActionDist {
    entries: Vec<(OnticAction, f64)>,
}

impl ActionDist {
    /// Normalizes non-negative weights. Returns `None` if no weight is
    /// positive.
    pub fn from_weights(weights: impl IntoIterator<Item = (OnticAction, f64)>) -> Option<Self> {
        let mut entries: Vec<(OnticAction, f64)> =
            weights.into_iter().filter(|&(_, w)| w > 0.0).collect();
        let total: f64 = entries.iter().map(|&(_, w)| w).sum();
        if total <= 0.0 || !total.is_finite() {
            return None;
        }
        entries.sort_by_key(|&(a, _)| a);
        for e in &mut entries {
            e.1 /= total;
        }
        Some(ActionDist { entries })
    }

    pub fn deterministic(action: OnticAction) -> Self {
        ActionDist {
            entries: vec![(action, 1.0)],
        }
    }

    pub fn prob(&self, action: OnticAction) -> f64 {
        self.entries
            .iter()
            .find(|&&(a, _)| a == action)
            .map_or(0.0, |&(_, p)| p)
    }

    pub fn supports(&self, action: OnticAction) -> bool {
        self.entries.iter().any(|&(a, _)| a == action)
    }

    pub fn iter(&self) -> impl Iterator<Item = (OnticAction, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn actions(&self) -> impl Iterator<Item = OnticAction> + '_ {
        self.entries.iter().map(|&(a, _)| a)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|&(_, p)| p).sum()
    }

    /// Inverse-CDF sample for `u` in `[0, 1)`.
    pub fn sample(&self, u: f64) -> OnticAction {
        let mut acc = 0.0;
        for &(a, p) in &self.entries {
            acc += p;
            if u < acc {
                return a;
            }
        }
        self.entries.last().expect("distribution is never empty").0
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Layout {
    Dense,
    /// Fetcher policies only store the empty-handed slot and the slot
    /// carrying their own goal's tool; every other slot is stuck on Noop.
    FetcherOwnTool { cells: usize, num_states: usize },
}

/// An agent's goal-directed policy, tabulated over a [`StateSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPolicy {
    kind: AgentKind,
    goal: usize,
    layout: Layout,
    dists: Vec<ActionDist>,
    stuck: ActionDist,
}

impl StochasticPolicy {
    /// Builds a policy with one distribution per state index.
    pub fn from_dists(kind: AgentKind, goal: usize, dists: Vec<ActionDist>) -> Self {
        StochasticPolicy {
            kind,
            goal,
            layout: Layout::Dense,
            dists,
            stuck: ActionDist::deterministic(OnticAction::Noop),
        }
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn goal(&self) -> usize {
        self.goal
    }

    pub fn num_states(&self) -> usize {
        match self.layout {
            Layout::Dense => self.dists.len(),
            Layout::FetcherOwnTool { num_states, .. } => num_states,
        }
    }

    pub fn dist(&self, state: usize) -> &ActionDist {
        match self.layout {
            Layout::Dense => &self.dists[state],
            Layout::FetcherOwnTool { cells, .. } => {
                let (slot, cell) = (state / cells, state % cells);
                if slot == 0 {
                    &self.dists[cell]
                } else if slot == self.goal + 1 {
                    &self.dists[cells + cell]
                } else {
                    &self.stuck
                }
            }
        }
    }

    pub fn prob(&self, state: usize, action: OnticAction) -> f64 {
        self.dist(state).prob(action)
    }
}

/// Indexed, deterministic state space.
pub trait StateSpace {
    fn num_states(&self) -> usize;

    /// Successor of `state` under `action`, or `None` if the action is not
    /// applicable.
    fn successor(&self, state: usize, action: OnticAction) -> Option<usize>;

    /// Hard bound on sampled trajectory length.
    fn step_cap(&self) -> usize {
        10 * self.num_states()
    }
}

/// Worker positions; state index is the row-major cell index.
#[derive(Debug, Clone, Copy)]
pub struct WorkerSpace<'a> {
    instance: &'a DomainInstance,
}

impl<'a> WorkerSpace<'a> {
    pub fn new(instance: &'a DomainInstance) -> Self {
        WorkerSpace { instance }
    }

    pub fn index(&self, pos: Coord) -> usize {
        self.instance.cell_index(pos)
    }
}

impl StateSpace for WorkerSpace<'_> {
    fn num_states(&self) -> usize {
        self.instance.num_cells()
    }

    fn successor(&self, state: usize, action: OnticAction) -> Option<usize> {
        let pos = self.instance.coord_of(state);
        worker_step(self.instance, pos, action)
            .ok()
            .map(|p| self.instance.cell_index(p))
    }

    fn step_cap(&self) -> usize {
        10 * self.instance.perimeter()
    }
}

/// Fetcher states. Index is `slot * cells + cell` where slot 0 is empty-handed
/// and slot `i + 1` carries station `i`'s tool, so the empty-handed states
/// occupy the first `cells` indices.
#[derive(Debug, Clone, Copy)]
pub struct FetcherSpace<'a> {
    instance: &'a DomainInstance,
}

impl<'a> FetcherSpace<'a> {
    pub fn new(instance: &'a DomainInstance) -> Self {
        FetcherSpace { instance }
    }

    pub fn index(&self, state: FetcherState) -> usize {
        let slot = state.held.map_or(0, |h| h + 1);
        slot * self.instance.num_cells() + self.instance.cell_index(state.pos)
    }

    pub fn state(&self, index: usize) -> FetcherState {
        let cells = self.instance.num_cells();
        let (slot, cell) = (index / cells, index % cells);
        FetcherState {
            pos: self.instance.coord_of(cell),
            held: slot.checked_sub(1),
        }
    }
}

impl StateSpace for FetcherSpace<'_> {
    fn num_states(&self) -> usize {
        self.instance.num_cells() * (self.instance.num_stations() + 1)
    }

    fn successor(&self, state: usize, action: OnticAction) -> Option<usize> {
        fetcher_step(self.instance, self.state(state), action)
            .ok()
            .map(|s| self.index(s))
    }

    fn step_cap(&self) -> usize {
        10 * self.instance.perimeter()
    }
}

/// Minimal number of moves between two cells.
pub fn shortest_distance(
    instance: &DomainInstance,
    from: Coord,
    to: Coord,
) -> Result<usize, DomainError> {
    instance.check_coord(from)?;
    instance.check_coord(to)?;
    Ok(from.manhattan(to))
}

/// Number of minimal move sequences from every cell to `target`, indexed by
/// cell. Saturates at `u128::MAX`.
fn plan_counts(instance: &DomainInstance, target: Coord) -> Vec<u128> {
    let n = instance.num_cells();
    let mut order: Vec<usize> = (0..n).collect();
    let dist = |cell: usize| instance.coord_of(cell).manhattan(target);
    order.sort_by_key(|&c| dist(c));
    let mut counts = vec![0u128; n];
    for cell in order {
        let pos = instance.coord_of(cell);
        if pos == target {
            counts[cell] = 1;
            continue;
        }
        let d = dist(cell);
        counts[cell] = MOVES
            .iter()
            .filter_map(|&a| instance.shift(pos, a))
            .filter(|&next| next.manhattan(target) + 1 == d)
            .fold(0u128, |acc, next| {
                acc.saturating_add(counts[instance.cell_index(next)])
            });
    }
    counts
}

/// Number of distinct minimal-length move sequences from `from` to `to`.
pub fn count_optimal_plans(
    instance: &DomainInstance,
    from: Coord,
    to: Coord,
) -> Result<u128, DomainError> {
    instance.check_coord(from)?;
    instance.check_coord(to)?;
    Ok(plan_counts(instance, to)[instance.cell_index(from)])
}

/// Distribution over moves at `pos` weighted by the plan counts of the
/// successor cells that are one step closer to the target.
fn toward(
    instance: &DomainInstance,
    pos: Coord,
    target: Coord,
    counts: &[u128],
) -> Option<ActionDist> {
    let d = pos.manhattan(target);
    ActionDist::from_weights(MOVES.iter().filter_map(|&a| {
        let next = instance.shift(pos, a)?;
        (next.manhattan(target) + 1 == d).then(|| (a, counts[instance.cell_index(next)] as f64))
    }))
}

/// URO policy of the worker for station `goal`, over [`WorkerSpace`].
pub fn worker_urop(instance: &DomainInstance, goal: usize) -> Result<StochasticPolicy, DomainError> {
    let target = instance.station(goal)?;
    let counts = plan_counts(instance, target);
    let dists = (0..instance.num_cells())
        .map(|cell| {
            let pos = instance.coord_of(cell);
            if pos == target {
                ActionDist::deterministic(OnticAction::Noop)
            } else {
                toward(instance, pos, target, &counts).expect("obstacle-free grid is connected")
            }
        })
        .collect();
    Ok(StochasticPolicy::from_dists(AgentKind::Worker, goal, dists))
}

/// URO policy of the fetcher for station `goal`, over [`FetcherSpace`].
///
/// The minimal plans walk to the goal's toolbox, pick up the tool and walk to
/// the station. Plans through the toolbox factor as (paths to the toolbox) x
/// (paths from the toolbox to the station), so the empty-handed leg weights
/// are the toolbox-leg plan counts.
pub fn fetcher_urop(
    instance: &DomainInstance,
    goal: usize,
) -> Result<StochasticPolicy, DomainError> {
    let station = instance.station(goal)?;
    let toolbox = instance.toolbox_for(goal)?;
    let cells = instance.num_cells();
    let to_toolbox = plan_counts(instance, toolbox);
    let to_station = plan_counts(instance, station);

    let mut dists = Vec::with_capacity(2 * cells);
    for cell in 0..cells {
        let pos = instance.coord_of(cell);
        let dist = if pos == toolbox {
            ActionDist::deterministic(OnticAction::Pickup(goal))
        } else {
            toward(instance, pos, toolbox, &to_toolbox).expect("connected grid")
        };
        dists.push(dist);
    }
    for cell in 0..cells {
        let pos = instance.coord_of(cell);
        let dist = if pos == station {
            ActionDist::deterministic(OnticAction::Noop)
        } else {
            toward(instance, pos, station, &to_station).expect("connected grid")
        };
        dists.push(dist);
    }
    Ok(StochasticPolicy {
        kind: AgentKind::Fetcher,
        goal,
        layout: Layout::FetcherOwnTool {
            cells,
            num_states: FetcherSpace::new(instance).num_states(),
        },
        dists,
        stuck: ActionDist::deterministic(OnticAction::Noop),
    })
}

/// URO policies of both agents for every station.
#[derive(Debug, Clone)]
pub struct UroPolicies {
    pub worker: Vec<StochasticPolicy>,
    pub fetcher: Vec<StochasticPolicy>,
}

impl UroPolicies {
    pub fn new(instance: &DomainInstance) -> Self {
        let goals = 0..instance.num_stations();
        UroPolicies {
            worker: goals
                .clone()
                .map(|g| worker_urop(instance, g).expect("valid goal"))
                .collect(),
            fetcher: goals
                .map(|g| fetcher_urop(instance, g).expect("valid goal"))
                .collect(),
        }
    }
}

pub fn worker_step(
    instance: &DomainInstance,
    pos: Coord,
    action: OnticAction,
) -> Result<Coord, DomainError> {
    match action {
        OnticAction::Noop => Ok(pos),
        OnticAction::Pickup(_) => Err(DomainError::IllegalTransition(
            "the worker cannot pick up tools".into(),
        )),
        _ => instance.shift(pos, action).ok_or_else(|| {
            DomainError::IllegalTransition(format!("worker move {action} leaves the grid at {pos}"))
        }),
    }
}

pub fn fetcher_step(
    instance: &DomainInstance,
    state: FetcherState,
    action: OnticAction,
) -> Result<FetcherState, DomainError> {
    match action {
        OnticAction::Noop => Ok(state),
        OnticAction::Pickup(goal) => {
            let toolbox = instance.toolbox_for(goal)?;
            if state.held.is_some() {
                return Err(DomainError::IllegalTransition(
                    "fetcher already holds a tool".into(),
                ));
            }
            if state.pos != toolbox {
                return Err(DomainError::IllegalTransition(format!(
                    "tool {goal} is at {toolbox}, fetcher is at {}",
                    state.pos
                )));
            }
            Ok(FetcherState {
                pos: state.pos,
                held: Some(goal),
            })
        }
        _ => {
            let pos = instance.shift(state.pos, action).ok_or_else(|| {
                DomainError::IllegalTransition(format!(
                    "fetcher move {action} leaves the grid at {}",
                    state.pos
                ))
            })?;
            Ok(FetcherState { pos, ..state })
        }
    }
}

/// Joint deterministic transition. Illegal actions are rejected, never
/// clamped.
pub fn step(
    instance: &DomainInstance,
    worker_pos: Coord,
    fetcher_state: FetcherState,
    worker_action: OnticAction,
    fetcher_action: OnticAction,
) -> Result<(Coord, FetcherState), DomainError> {
    Ok((
        worker_step(instance, worker_pos, worker_action)?,
        fetcher_step(instance, fetcher_state, fetcher_action)?,
    ))
}
