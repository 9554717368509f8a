//! Mean-field game environments: the abstract transition/reward interface,
//! the congestion grid instances and fixed (mean-field independent) MDPs.
//!
//! Grid states use 1-based coordinates `(x, y)` with `x, y` in `1..=side`,
//! indexed row-major as `(x - 1) * side + (y - 1)`. The four actions are the
//! diagonal moves `{-1, 1}^2` in the order `(-1,-1), (-1,1), (1,-1), (1,1)`.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};
use crate::types::{check_distribution, MeanField, StateActionDims, Table, SIMPLEX_TOL};

/// Dynamics and rewards of the generic agent given the population mean-field.
pub trait MfgEnvironment: Send + Sync {
    fn dims(&self) -> StateActionDims;

    fn initial_distribution(&self) -> &MeanField;

    /// Writes `P(. | s, a, mu)` into `out` (length S).
    fn transition_into(&self, s: usize, a: usize, mu: &MeanField, out: &mut [f64]);

    /// Reward `R(s, a, mu)` in `[0, 1]`.
    fn reward(&self, s: usize, a: usize, mu: &MeanField) -> f64;

    fn transition_dist(&self, s: usize, a: usize, mu: &MeanField) -> Vec<f64> {
        let mut out = vec![0.0; self.dims().num_states];
        self.transition_into(s, a, mu, &mut out);
        out
    }

    /// Samples a successor by inverse CDF on a single uniform draw `u` in `[0, 1)`.
    fn sample_next(&self, s: usize, a: usize, mu: &MeanField, u: f64) -> usize {
        sample_index(&self.transition_dist(s, a, mu), u)
    }
}

/// Inverse-CDF lookup; rounding slack at the top falls to the last
/// positive-probability index.
pub fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// One transition of the environment: samples the successor and reports the reward.
pub fn env_step<E: MfgEnvironment + ?Sized, R: Rng + ?Sized>(
    env: &E,
    s: usize,
    a: usize,
    mu: &MeanField,
    rng: &mut R,
) -> Result<(usize, f64)> {
    let dims = env.dims();
    check_index("state", s, dims.num_states)?;
    check_index("action", a, dims.num_actions)?;
    if mu.num_states() != dims.num_states {
        return Err(MfgError::DimensionMismatch {
            expected: format!("mean-field over {} states", dims.num_states),
            actual: format!("{} states", mu.num_states()),
        });
    }
    let u: f64 = rng.gen();
    Ok((env.sample_next(s, a, mu, u), env.reward(s, a, mu)))
}

pub(crate) fn check_index(what: &'static str, index: usize, size: usize) -> Result<()> {
    if index >= size {
        return Err(MfgError::OutOfRange { what, index, size });
    }
    Ok(())
}

/// Transition kernel stored as an `S x A x S` array.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl Kernel {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != num_states * num_actions * num_states {
            return Err(MfgError::DimensionMismatch {
                expected: format!("{num_states}x{num_actions}x{num_states} kernel"),
                actual: format!("{} entries", probs.len()),
            });
        }
        for (i, row) in probs.chunks(num_states).enumerate() {
            check_distribution(row, SIMPLEX_TOL).map_err(|e| {
                MfgError::NotStochastic(format!(
                    "kernel row (s={}, a={}): {e}",
                    i / num_actions,
                    i % num_actions
                ))
            })?;
        }
        let mut cdf = probs.clone();
        for row in cdf.chunks_mut(num_states) {
            let mut acc = 0.0;
            for x in row.iter_mut() {
                acc += *x;
                *x = acc;
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            probs,
            cdf,
        })
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.probs[start..start + self.num_states]
    }

    fn sample(&self, s: usize, a: usize, u: f64) -> usize {
        let start = (s * self.num_actions + a) * self.num_states;
        let cdf = &self.cdf[start..start + self.num_states];
        let probs = self.row(s, a);
        let mut last = 0;
        for j in 0..self.num_states {
            if probs[j] > 0.0 {
                last = j;
                if u < cdf[j] {
                    return j;
                }
            }
        }
        last
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

/// Mean-field independent MDP with a fixed kernel and reward table.
#[derive(Debug, Clone)]
pub struct FixedMdp {
    kernel: Kernel,
    rewards: Table,
    initial: MeanField,
}

/// Builds an environment that ignores the mean-field entirely.
pub fn make_fixed_mdp_env(kernel: Vec<f64>, rewards: Table) -> Result<FixedMdp> {
    let (s, a) = (rewards.rows(), rewards.cols());
    StateActionDims::new(s, a)?;
    let kernel = Kernel::new(s, a, kernel)?;
    if let Some(r) = rewards
        .as_slice()
        .iter()
        .find(|r| !(0.0..=1.0).contains(*r))
    {
        return Err(MfgError::InvalidParameter(format!(
            "reward {r} outside [0,1]"
        )));
    }
    Ok(FixedMdp {
        kernel,
        rewards,
        initial: MeanField::uniform(s),
    })
}

impl FixedMdp {
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn rewards(&self) -> &Table {
        &self.rewards
    }
}

impl MfgEnvironment for FixedMdp {
    fn dims(&self) -> StateActionDims {
        StateActionDims {
            num_states: self.rewards.rows(),
            num_actions: self.rewards.cols(),
        }
    }

    fn initial_distribution(&self) -> &MeanField {
        &self.initial
    }

    fn transition_into(&self, s: usize, a: usize, _mu: &MeanField, out: &mut [f64]) {
        out.copy_from_slice(self.kernel.row(s, a));
    }

    fn reward(&self, s: usize, a: usize, _mu: &MeanField) -> f64 {
        self.rewards[(s, a)]
    }

    fn sample_next(&self, s: usize, a: usize, _mu: &MeanField, u: f64) -> usize {
        self.kernel.sample(s, a, u)
    }
}

/// Missing keys take the 5x5 defaults when deserialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CongestionGridParams {
    pub side: usize,
    pub jostle_p: f64,
    pub congestion_c: f64,
    pub favorable_reward: f64,
    pub baseline_reward: f64,
    /// 1-based `(x, y)` grid coordinates.
    pub favorable_states: Vec<(usize, usize)>,
}

impl Default for CongestionGridParams {
    fn default() -> Self {
        Self {
            side: 5,
            jostle_p: 0.1,
            congestion_c: 0.5,
            favorable_reward: 1.0,
            baseline_reward: 0.1,
            favorable_states: vec![(3, 3), (3, 4), (4, 3), (4, 4)],
        }
    }
}

impl CongestionGridParams {
    /// The 3x3 desk-scale instance: same reward levels, favorable cells in the
    /// lower-right 2x2 block.
    pub fn small() -> Self {
        Self {
            side: 3,
            favorable_states: vec![(2, 2), (2, 3), (3, 2), (3, 3)],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.side == 0 {
            return Err(MfgError::InvalidParameter("side must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.jostle_p) {
            return Err(MfgError::InvalidParameter(format!(
                "jostle_p must lie in [0,1), got {}",
                self.jostle_p
            )));
        }
        if !(0.0..=1.0).contains(&self.congestion_c) {
            return Err(MfgError::InvalidParameter(format!(
                "congestion_c must lie in [0,1] to keep rewards nonnegative, got {}",
                self.congestion_c
            )));
        }
        if !(self.favorable_reward > 0.0 && self.favorable_reward <= 1.0) {
            return Err(MfgError::InvalidParameter(format!(
                "favorable_reward must lie in (0,1], got {}",
                self.favorable_reward
            )));
        }
        if !(self.baseline_reward >= 0.0 && self.baseline_reward < self.favorable_reward) {
            return Err(MfgError::InvalidParameter(format!(
                "baseline_reward must lie in [0, favorable_reward), got {}",
                self.baseline_reward
            )));
        }
        for &(x, y) in &self.favorable_states {
            if x == 0 || y == 0 || x > self.side || y > self.side {
                return Err(MfgError::InvalidParameter(format!(
                    "favorable state ({x},{y}) outside the {0}x{0} grid",
                    self.side
                )));
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.side * self.side
    }

    pub fn state_index(&self, x: usize, y: usize) -> usize {
        (x - 1) * self.side + (y - 1)
    }

    pub fn coords(&self, s: usize) -> (usize, usize) {
        (s / self.side + 1, s % self.side + 1)
    }
}

pub const GRID_ACTIONS: [(i64, i64); 4] = [(-1, -1), (-1, 1), (1, -1), (1, 1)];

/// States of the non-closed class in the two-class grid.
pub const TRANSIENT_CLASS: [(usize, usize); 3] = [(4, 5), (5, 4), (5, 5)];

/// Congestion-averse crowd on a square grid.
#[derive(Debug, Clone)]
pub struct CongestionGrid {
    params: CongestionGridParams,
    kernel: Kernel,
    base_reward: Vec<f64>,
    initial: MeanField,
}

fn clamp_coord(v: i64, side: usize) -> usize {
    v.clamp(1, side as i64) as usize
}

fn grid_kernel(params: &CongestionGridParams) -> Vec<f64> {
    let side = params.side;
    let n = params.num_states();
    let p = params.jostle_p;
    let mut probs = vec![0.0; n * GRID_ACTIONS.len() * n];
    for s in 0..n {
        let (x, y) = params.coords(s);
        for (a, &(dx, dy)) in GRID_ACTIONS.iter().enumerate() {
            let row = &mut probs[(s * GRID_ACTIONS.len() + a) * n..][..n];
            let tx = clamp_coord(x as i64 + dx, side);
            let ty = clamp_coord(y as i64 + dy, side);
            row[params.state_index(tx, ty)] += 1.0 - p;
            if p > 0.0 {
                let neighbors: BTreeSet<usize> = [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)]
                    .iter()
                    .map(|&(ex, ey)| {
                        params.state_index(
                            clamp_coord(tx as i64 + ex, side),
                            clamp_coord(ty as i64 + ey, side),
                        )
                    })
                    .collect();
                let share = p / neighbors.len() as f64;
                for j in neighbors {
                    row[j] += share;
                }
            }
        }
    }
    probs
}

/// Builds the congestion grid: a move lands at the clamped target with
/// probability `1 - p`, otherwise uniformly on the (clamped, deduplicated)
/// 4-neighborhood of that target.
pub fn make_congestion_env(params: CongestionGridParams) -> Result<CongestionGrid> {
    params.validate()?;
    let kernel = Kernel::new(
        params.num_states(),
        GRID_ACTIONS.len(),
        grid_kernel(&params),
    )?;
    Ok(CongestionGrid::assemble(params, kernel))
}

/// Builds the 5x5 grid in which transitions from the closed class into
/// `TRANSIENT_CLASS` are removed. Removed mass is spread proportionally over
/// the remaining support; if nothing remains, the agent stays in place.
pub fn make_two_class_env(params: CongestionGridParams) -> Result<CongestionGrid> {
    params.validate()?;
    if params.side != 5 {
        return Err(MfgError::InvalidParameter(format!(
            "the two-class grid is defined for side 5, got {}",
            params.side
        )));
    }
    let n = params.num_states();
    let transient: Vec<usize> = TRANSIENT_CLASS
        .iter()
        .map(|&(x, y)| params.state_index(x, y))
        .collect();
    let mut probs = grid_kernel(&params);
    for s in (0..n).filter(|s| !transient.contains(s)) {
        for a in 0..GRID_ACTIONS.len() {
            let row = &mut probs[(s * GRID_ACTIONS.len() + a) * n..][..n];
            let removed: f64 = transient.iter().map(|&j| row[j]).sum();
            if removed == 0.0 {
                continue;
            }
            for &j in &transient {
                row[j] = 0.0;
            }
            let kept = 1.0 - removed;
            if kept <= 0.0 {
                row.iter_mut().for_each(|x| *x = 0.0);
                row[s] = 1.0;
            } else {
                row.iter_mut().for_each(|x| *x /= kept);
            }
        }
    }
    let kernel = Kernel::new(n, GRID_ACTIONS.len(), probs)?;
    Ok(CongestionGrid::assemble(params, kernel))
}

impl CongestionGrid {
    fn assemble(params: CongestionGridParams, kernel: Kernel) -> Self {
        let n = params.num_states();
        let mut base_reward = vec![params.baseline_reward; n];
        for &(x, y) in &params.favorable_states {
            base_reward[params.state_index(x, y)] = params.favorable_reward;
        }
        Self {
            initial: MeanField::uniform(n),
            params,
            kernel,
            base_reward,
        }
    }

    pub fn params(&self) -> &CongestionGridParams {
        &self.params
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }
}

impl MfgEnvironment for CongestionGrid {
    fn dims(&self) -> StateActionDims {
        StateActionDims {
            num_states: self.params.num_states(),
            num_actions: GRID_ACTIONS.len(),
        }
    }

    fn initial_distribution(&self) -> &MeanField {
        &self.initial
    }

    fn transition_into(&self, s: usize, a: usize, _mu: &MeanField, out: &mut [f64]) {
        out.copy_from_slice(self.kernel.row(s, a));
    }

    fn reward(&self, s: usize, _a: usize, mu: &MeanField) -> f64 {
        (1.0 - self.params.congestion_c * mu[s]) * self.base_reward[s]
    }

    fn sample_next(&self, s: usize, a: usize, _mu: &MeanField, u: f64) -> usize {
        self.kernel.sample(s, a, u)
    }
}

/// States reachable from `start` with positive probability under some action
/// sequence, for the kernel frozen at `mu`.
pub fn reachable_from<E: MfgEnvironment + ?Sized>(
    env: &E,
    start: usize,
    mu: &MeanField,
) -> Vec<bool> {
    let dims = env.dims();
    let mut seen = vec![false; dims.num_states];
    let mut stack = vec![start];
    seen[start] = true;
    let mut row = vec![0.0; dims.num_states];
    while let Some(s) = stack.pop() {
        for a in 0..dims.num_actions {
            env.transition_into(s, a, mu, &mut row);
            for (j, &p) in row.iter().enumerate() {
                if p > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    seen
}

/// True when every ordered state pair is connected by a positive-probability path.
pub fn is_communicating<E: MfgEnvironment + ?Sized>(env: &E, mu: &MeanField) -> bool {
    (0..env.dims().num_states).all(|s| reachable_from(env, s, mu).iter().all(|&r| r))
}
