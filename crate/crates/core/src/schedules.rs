//! Episodic two-timescale step sizes, exploration coefficients and the
//! finite cover of the simplex used to project mean-fields.

use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};
use crate::norms::l1_distance;
use crate::types::MeanField;

/// How the uniform exploration weight evolves within an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplorationScheme {
    /// No noise at the first step of each episode, `psi / (1 - c_pi / k^theta)` afterwards.
    #[default]
    Piecewise,
    /// Constant weight `psi` at every step.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub c_mu: f64,
    pub c_pi: f64,
    pub gamma: f64,
    pub theta: f64,
    pub zeta: f64,
    pub c_beta: f64,
    pub nu: f64,
    pub psi: f64,
    pub lambda: f64,
    pub exploration: ExplorationScheme,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            c_mu: 0.5,
            c_pi: 0.5,
            gamma: 0.6,
            theta: 0.55,
            zeta: 1.1,
            c_beta: 5.0,
            nu: 0.55,
            psi: 0.2,
            lambda: 1.0,
            exploration: ExplorationScheme::Piecewise,
        }
    }
}

impl ScheduleParams {
    /// Checks every constraint, naming the first one that fails.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(MfgError::InvalidParameter(msg));
        if !(self.c_mu > 0.0 && self.c_mu <= 1.0) {
            return fail(format!("c_mu must lie in (0,1], got {}", self.c_mu));
        }
        if !(self.c_pi > 0.0 && self.c_pi <= 1.0) {
            return fail(format!("c_pi must lie in (0,1], got {}", self.c_pi));
        }
        if !(self.theta > 0.0) {
            return fail(format!(
                "theta must be > 0 (0 < theta < gamma < 1 < zeta), got {}",
                self.theta
            ));
        }
        if !(self.theta < self.gamma) {
            return fail(format!(
                "theta must be < gamma (0 < theta < gamma < 1 < zeta), got theta={} gamma={}",
                self.theta, self.gamma
            ));
        }
        if !(self.gamma < 1.0) {
            return fail(format!(
                "gamma must be < 1 (0 < theta < gamma < 1 < zeta), got {}",
                self.gamma
            ));
        }
        if !(self.zeta > 1.0 && self.zeta.is_finite()) {
            return fail(format!(
                "zeta must be > 1 (0 < theta < gamma < 1 < zeta), got {}",
                self.zeta
            ));
        }
        if !(self.c_beta > 0.0 && self.c_beta.is_finite()) {
            return fail(format!("c_beta must be positive, got {}", self.c_beta));
        }
        if !(self.nu > 0.5 && self.nu <= 1.0) {
            return fail(format!("nu must lie in (0.5, 1], got {}", self.nu));
        }
        if !(self.psi > 0.0 && self.psi < 1.0 - self.c_pi) {
            return fail(format!(
                "psi must lie in (0, 1 - c_pi) = (0, {}), got {}",
                1.0 - self.c_pi,
                self.psi
            ));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda must be positive, got {}", self.lambda));
        }
        Ok(())
    }

    /// Mean-field step `c_mu / (k^gamma t^zeta)`.
    pub fn step_size_mu(&self, k: usize, t: usize) -> f64 {
        self.c_mu / ((k as f64).powf(self.gamma) * (t as f64).powf(self.zeta))
    }

    /// Policy step `c_pi / (k^theta t^zeta)`.
    pub fn step_size_pi(&self, k: usize, t: usize) -> f64 {
        self.c_pi / ((k as f64).powf(self.theta) * (t as f64).powf(self.zeta))
    }

    pub fn exploration_coeff(&self, k: usize, t: usize) -> f64 {
        match self.exploration {
            ExplorationScheme::Piecewise if t <= 1 => 0.0,
            ExplorationScheme::Piecewise => {
                self.psi / (1.0 - self.c_pi / (k as f64).powf(self.theta))
            }
            ExplorationScheme::Constant => self.psi,
        }
    }

    /// Closed-form lower bound on every action probability after the first
    /// step of an episode, for the active exploration scheme.
    pub fn exploration_floor(&self, num_actions: usize) -> f64 {
        let per_action = self.c_pi * self.psi / num_actions as f64;
        match self.exploration {
            ExplorationScheme::Piecewise => per_action / 2f64.powf(self.zeta),
            ExplorationScheme::Constant => per_action,
        }
    }
}

/// Finite L1 cover of the probability simplex: all points whose coordinates
/// are multiples of `1/resolution`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonNet {
    mesh: f64,
    num_states: usize,
    resolution: usize,
    /// Points stored back to back, each of length `num_states`, in
    /// lexicographic order.
    points: Vec<f64>,
}

/// `C(n + s - 1, s - 1)` in floating point.
pub fn simplex_grid_size(num_states: usize, resolution: usize) -> f64 {
    let k = num_states.saturating_sub(1);
    (1..=k).fold(1.0, |acc, i| acc * (resolution + i) as f64 / i as f64)
}

pub fn build_epsilon_net(num_states: usize, mesh: f64, budget: usize) -> Result<EpsilonNet> {
    if num_states == 0 {
        return Err(MfgError::InvalidParameter(
            "epsilon-net over zero states".into(),
        ));
    }
    if !(mesh > 0.0 && mesh.is_finite()) {
        return Err(MfgError::InvalidParameter(format!(
            "net mesh must be positive, got {mesh}"
        )));
    }
    let resolution = (num_states as f64 / mesh).ceil().max(1.0) as usize;
    let required = simplex_grid_size(num_states, resolution).round();
    if required > budget as f64 {
        return Err(MfgError::NetBudgetExceeded { required, budget });
    }
    let mut points = Vec::with_capacity(required as usize * num_states);
    let mut counts = vec![0usize; num_states];
    enumerate_compositions(&mut counts, 0, resolution, &mut |c| {
        points.extend(c.iter().map(|&m| m as f64 / resolution as f64));
    });
    Ok(EpsilonNet {
        mesh,
        num_states,
        resolution,
        points,
    })
}

/// Visits every way of writing `remaining` as an ordered sum over
/// `counts[pos..]`, in increasing lexicographic order of the resulting point.
fn enumerate_compositions(
    counts: &mut [usize],
    pos: usize,
    remaining: usize,
    visit: &mut dyn FnMut(&[usize]),
) {
    if pos + 1 == counts.len() {
        counts[pos] = remaining;
        visit(counts);
        return;
    }
    for m in 0..=remaining {
        counts[pos] = m;
        enumerate_compositions(counts, pos + 1, remaining - m, visit);
    }
}

/// Finest mesh whose grid fits in `budget` points.
pub fn finest_feasible_mesh(num_states: usize, budget: usize) -> f64 {
    let mut n = 1;
    while simplex_grid_size(num_states, n + 1) <= budget as f64 {
        n += 1;
    }
    num_states as f64 / n as f64
}

impl EpsilonNet {
    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.num_states
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.num_states..(i + 1) * self.num_states]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks(self.num_states)
    }

    /// Nearest net point in L1. Points are stored in lexicographic order,
    /// so keeping the first minimum breaks ties lexicographically.
    pub fn project(&self, mu: &MeanField) -> Result<MeanField> {
        if self.is_empty() {
            return Err(MfgError::EmptyNet);
        }
        if mu.num_states() != self.num_states {
            return Err(MfgError::DimensionMismatch {
                expected: format!("{} states", self.num_states),
                actual: format!("{} states", mu.num_states()),
            });
        }
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, p) in self.points().enumerate() {
            let d = l1_distance(p, mu.probs());
            if d < best_dist {
                best = i;
                best_dist = d;
            }
        }
        Ok(MeanField::from_vec_unchecked(self.point(best).to_vec()))
    }
}
