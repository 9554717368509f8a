//! Online estimators fed by the agent's own trajectory: smoothed transition
//! counts for the state chain and asynchronous Q-learning.

use serde::{Deserialize, Serialize};

use crate::env::check_index;
use crate::error::{MfgError, Result};
use crate::types::{QTable, StateActionDims, Table};

/// Visit counts of the state chain with the add-`1/S` smoothed estimate
/// `P(i,j) = (N(i,j) + 1/S) / (N(i) + 1)`.
///
/// The estimate is kept current on every record. `reset` clears the counts
/// and moves the last estimate into `carried`, which the next episode uses
/// before it has observed any transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionCounter {
    num_states: usize,
    pair_counts: Vec<u64>,
    state_counts: Vec<u64>,
    estimate: Table,
    carried: Table,
}

impl TransitionCounter {
    pub fn new(num_states: usize) -> Self {
        let uniform = Table::filled(num_states, num_states, 1.0 / num_states as f64);
        Self {
            num_states,
            pair_counts: vec![0; num_states * num_states],
            state_counts: vec![0; num_states],
            estimate: uniform.clone(),
            carried: uniform,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn record(&mut self, i: usize, j: usize) -> Result<()> {
        check_index("state", i, self.num_states)?;
        check_index("state", j, self.num_states)?;
        let n = self.num_states;
        self.pair_counts[i * n + j] += 1;
        self.state_counts[i] += 1;
        let denom = self.state_counts[i] as f64 + 1.0;
        let smooth = 1.0 / n as f64;
        let counts = &self.pair_counts[i * n..(i + 1) * n];
        for (e, &c) in self.estimate.row_mut(i).iter_mut().zip(counts) {
            *e = (c as f64 + smooth) / denom;
        }
        Ok(())
    }

    pub fn pair_count(&self, i: usize, j: usize) -> u64 {
        self.pair_counts[i * self.num_states + j]
    }

    pub fn state_count(&self, i: usize) -> u64 {
        self.state_counts[i]
    }

    pub fn total_count(&self) -> u64 {
        self.state_counts.iter().sum()
    }

    /// Current smoothed estimate from this episode's counts.
    pub fn estimate(&self) -> &Table {
        &self.estimate
    }

    /// Estimate carried over from the end of the previous episode.
    pub fn carried_estimate(&self) -> &Table {
        &self.carried
    }

    pub fn reset(&mut self) {
        if self.total_count() > 0 {
            self.carried = self.estimate.clone();
        }
        self.pair_counts.iter_mut().for_each(|c| *c = 0);
        self.state_counts.iter_mut().for_each(|c| *c = 0);
        self.estimate = Table::filled(
            self.num_states,
            self.num_states,
            1.0 / self.num_states as f64,
        );
    }
}

/// Tabular Q-learning driven by a global per-episode clock.
///
/// Step size is `beta_t = c_beta / (t + 1)^nu`, capped at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QLearner {
    q: QTable,
    clock: u64,
    c_beta: f64,
    nu: f64,
}

impl QLearner {
    pub fn new(dims: StateActionDims, rho: f64, c_beta: f64, nu: f64) -> Result<Self> {
        if !(c_beta > 0.0 && c_beta.is_finite()) {
            return Err(MfgError::InvalidParameter(format!(
                "c_beta must be positive, got {c_beta}"
            )));
        }
        if !(nu > 0.5 && nu <= 1.0) {
            return Err(MfgError::InvalidParameter(format!(
                "nu must lie in (0.5, 1], got {nu}"
            )));
        }
        Ok(Self {
            q: QTable::zeros(dims, rho)?,
            clock: 0,
            c_beta,
            nu,
        })
    }

    pub fn q(&self) -> &QTable {
        &self.q
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn step_size(&self) -> f64 {
        (self.c_beta / ((self.clock + 1) as f64).powf(self.nu)).min(1.0)
    }

    /// `Q(s,a) <- (1 - beta) Q(s,a) + beta (r + rho max_a' Q(s',a'))`, then advances the clock.
    pub fn update(&mut self, s: usize, a: usize, reward: f64, s_next: usize) -> Result<()> {
        let beta = self.step_size();
        self.update_with_step(s, a, reward, s_next, beta)?;
        self.clock += 1;
        Ok(())
    }

    pub fn update_with_step(
        &mut self,
        s: usize,
        a: usize,
        reward: f64,
        s_next: usize,
        beta: f64,
    ) -> Result<()> {
        let dims = self.q.dims();
        check_index("state", s, dims.num_states)?;
        check_index("state", s_next, dims.num_states)?;
        check_index("action", a, dims.num_actions)?;
        let target = reward + self.q.rho() * self.q.max_action(s_next).1;
        let entry = &mut self.q.values_mut()[(s, a)];
        *entry = (1.0 - beta) * *entry + beta * target;
        if !entry.is_finite() {
            return Err(MfgError::NonFinite(format!("Q({s},{a}) after update")));
        }
        Ok(())
    }

    pub fn reset_clock(&mut self) {
        self.clock = 0;
    }
}
