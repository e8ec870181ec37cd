//! Divergence points and the Expected Divergence Point (EDP).
//!
//! `EDP(s, pi1 | pi2)` is the expected 1-indexed timestep at which a
//! trajectory sampled from `pi2` starting in `s` first takes an action that
//! `pi1` gives zero probability. It satisfies the fixed point
//!
//! ```text
//! EDP(s) = [1 - sum_{a in A'(s)} pi2(s,a)] + sum_{a in A'(s)} pi2(s,a) * (1 + EDP(s'))
//! A'(s)  = { a | pi1(s,a) > 0 }
//! ```
//!
//! which [`edp_policy_evaluation`] solves by Jacobi sweeps from an all-zero
//! table. [`edp_monte_carlo`] estimates the same quantity by sampling and is
//! kept as an independent check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{OnticAction, StateSpace, StochasticPolicy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdpError {
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("policies cover {found} states but the space has {expected}")]
    StateCountMismatch { expected: usize, found: usize },
    #[error("policy for goal {goal} plays {action} in state {state}, which has no successor")]
    InapplicableAction {
        goal: usize,
        state: usize,
        action: OnticAction,
    },
    #[error(
        "EDP({g1} | {g2}) did not converge: residual {residual:e} after {sweeps} sweeps"
    )]
    NonConvergence {
        g1: usize,
        g2: usize,
        sweeps: usize,
        residual: f64,
    },
    #[error("trajectory from state {state} did not diverge within {cap} steps")]
    DivergenceImpossible { state: usize, cap: usize },
}

/// `s0, a1, s1, a2, s2, ...` over state indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial: usize,
    pub steps: Vec<(OnticAction, usize)>,
}

impl Trajectory {
    pub fn new(initial: usize) -> Self {
        Trajectory {
            initial,
            steps: Vec::new(),
        }
    }

    /// Rolls `actions` forward through `space`. Returns `None` if an action
    /// is inapplicable.
    pub fn from_actions(
        space: &impl StateSpace,
        initial: usize,
        actions: impl IntoIterator<Item = OnticAction>,
    ) -> Option<Self> {
        let mut traj = Trajectory::new(initial);
        let mut s = initial;
        for a in actions {
            s = space.successor(s, a)?;
            traj.steps.push((a, s));
        }
        Some(traj)
    }

    /// True when every recorded successor agrees with `space`.
    pub fn is_consistent(&self, space: &impl StateSpace) -> bool {
        let mut s = self.initial;
        self.steps.iter().all(|&(a, next)| {
            let ok = space.successor(s, a) == Some(next);
            s = next;
            ok
        })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// First 1-indexed timestep `t` with `policy(s_{t-1}, a_t) = 0`, or `None`
/// when the whole trajectory is explained by `policy`.
pub fn divergence_point(policy: &StochasticPolicy, trajectory: &Trajectory) -> Option<usize> {
    let mut s = trajectory.initial;
    for (t, &(a, next)) in trajectory.steps.iter().enumerate() {
        if policy.prob(s, a) == 0.0 {
            return Some(t + 1);
        }
        s = next;
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdpConfig {
    pub epsilon: f64,
    /// Defaults to `10 * |S|` when `None`.
    pub max_sweeps: Option<usize>,
}

impl Default for EdpConfig {
    fn default() -> Self {
        EdpConfig {
            epsilon: 1e-6,
            max_sweeps: None,
        }
    }
}

/// Converged EDP values for the ordered goal pair `(g1, g2)`, i.e.
/// `EDP(s, pi_g1 | pi_g2)` for every state `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdpTable {
    pub g1: usize,
    pub g2: usize,
    pub values: Vec<f64>,
    pub epsilon: f64,
    pub sweeps: usize,
}

impl EdpTable {
    pub fn get(&self, state: usize) -> f64 {
        self.values[state]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_policies(
    space: &impl StateSpace,
    policies: [&StochasticPolicy; 2],
) -> Result<(), EdpError> {
    let n = space.num_states();
    for p in policies {
        if p.num_states() != n {
            return Err(EdpError::StateCountMismatch {
                expected: n,
                found: p.num_states(),
            });
        }
    }
    // Only pi2's actions are ever followed.
    let pi2 = policies[1];
    for s in 0..n {
        for a in pi2.dist(s).actions() {
            if space.successor(s, a).is_none() {
                return Err(EdpError::InapplicableAction {
                    goal: pi2.goal(),
                    state: s,
                    action: a,
                });
            }
        }
    }
    Ok(())
}

/// One Jacobi sweep: reads only `old`, writes a fresh table.
///
/// The update is evaluated as `1 + sum_{a in A'} pi2(s,a) * old[s']`, which is
/// the Bellman right-hand side with the constant terms collected; it keeps
/// every value at least 1 without rounding below.
pub fn bellman_sweep(
    space: &impl StateSpace,
    pi1: &StochasticPolicy,
    pi2: &StochasticPolicy,
    old: &[f64],
) -> Vec<f64> {
    (0..space.num_states())
        .map(|s| {
            let allowed = pi1.dist(s);
            let carried: f64 = pi2
                .dist(s)
                .iter()
                .filter(|&(a, _)| allowed.supports(a))
                .map(|(a, p)| {
                    let next = space
                        .successor(s, a)
                        .expect("checked by check_policies");
                    p * old[next]
                })
                .sum();
            1.0 + carried
        })
        .collect()
}

/// Residual of the Bellman equation at every state, `|rhs(s) - values[s]|`.
pub fn bellman_residuals(
    space: &impl StateSpace,
    pi1: &StochasticPolicy,
    pi2: &StochasticPolicy,
    values: &[f64],
) -> Vec<f64> {
    bellman_sweep(space, pi1, pi2, values)
        .into_iter()
        .zip(values)
        .map(|(new, old)| (new - old).abs())
        .collect()
}

/// Policy evaluation of `EDP(., pi1 | pi2)` over the whole state space.
pub fn edp_policy_evaluation(
    space: &impl StateSpace,
    pi1: &StochasticPolicy,
    pi2: &StochasticPolicy,
    config: &EdpConfig,
) -> Result<EdpTable, EdpError> {
    if !(config.epsilon > 0.0) {
        return Err(EdpError::InvalidEpsilon(config.epsilon));
    }
    check_policies(space, [pi1, pi2])?;
    let n = space.num_states();
    let max_sweeps = config.max_sweeps.unwrap_or(10 * n).max(1);

    let mut values = vec![0.0; n];
    let mut sweeps = 0;
    loop {
        let next = bellman_sweep(space, pi1, pi2, &values);
        let err = next
            .iter()
            .zip(&values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        values = next;
        sweeps += 1;
        if err <= config.epsilon {
            break;
        }
        if sweeps >= max_sweeps {
            return Err(EdpError::NonConvergence {
                g1: pi1.goal(),
                g2: pi2.goal(),
                sweeps,
                residual: err,
            });
        }
    }
    Ok(EdpTable {
        g1: pi1.goal(),
        g2: pi2.goal(),
        values,
        epsilon: config.epsilon,
        sweeps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Samples `samples` trajectories from `pi2` starting at `state` and averages
/// their divergence point from `pi1`.
pub fn edp_monte_carlo(
    space: &impl StateSpace,
    pi1: &StochasticPolicy,
    pi2: &StochasticPolicy,
    state: usize,
    samples: usize,
    seed: u64,
) -> Result<McEstimate, EdpError> {
    if samples == 0 {
        return Err(EdpError::NoSamples);
    }
    check_policies(space, [pi1, pi2])?;
    let cap = space.step_cap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let mut s = state;
        let mut t = 0usize;
        let dp = loop {
            t += 1;
            if t > cap {
                return Err(EdpError::DivergenceImpossible { state, cap });
            }
            let a = pi2.dist(s).sample(rng.gen::<f64>());
            if pi1.prob(s, a) == 0.0 {
                break t;
            }
            s = space.successor(s, a).expect("checked by check_policies");
        };
        let dp = dp as f64;
        sum += dp;
        sum_sq += dp * dp;
    }
    let n = samples as f64;
    let mean = sum / n;
    let std_error = if samples > 1 {
        let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        std_error,
        samples,
    })
}
