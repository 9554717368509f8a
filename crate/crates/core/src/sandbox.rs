//! The single-sample-path learner.
//!
//! One generic agent walks the environment for `K` episodes of `T` steps.
//! At every step the mean-field estimate moves toward the push-forward under
//! the estimated state chain, the policy moves toward the Boltzmann policy of
//! the current Q-estimate (plus uniform exploration), then the agent acts,
//! and the transition counter and Q-learner consume the observed transition.
//! Step sizes decay as `1/t^zeta` inside an episode and as `1/k^gamma`
//! (mean-field) and `1/k^theta` (policy) across episodes.
//!
//! The returned equilibrium estimate averages the first-step mean-fields and
//! policies of episodes `1..K-1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{sample_index, MfgEnvironment};
use crate::error::{MfgError, Result};
use crate::estimators::{QLearner, TransitionCounter};
use crate::norms::{
    frobenius_norm, inf_norm, l1_distance, policy_tv_distance, softmax_into, softmax_policy,
};
use crate::oracle::{induced_kernel, induced_q_star, push_forward};
use crate::schedules::{EpsilonNet, ScheduleParams};
use crate::snapshot::Checkpoint;
use crate::types::{MeanField, Policy, QTable, Table, SIMPLEX_TOL};

/// One mean-field step: `(1 - c) mu + c P^T mu`, optionally projected onto a net.
pub fn update_mean_field(
    prev: &MeanField,
    p_hat: &Table,
    c: f64,
    projection: Option<&EpsilonNet>,
) -> Result<MeanField> {
    if p_hat.rows() != prev.num_states() || p_hat.cols() != prev.num_states() {
        return Err(MfgError::DimensionMismatch {
            expected: format!("{0}x{0} transition matrix", prev.num_states()),
            actual: format!("{}x{}", p_hat.rows(), p_hat.cols()),
        });
    }
    p_hat.check_row_stochastic(SIMPLEX_TOL)?;
    let mut next = prev.probs().to_vec();
    mix_mean_field(prev.probs(), p_hat, c, &mut next);
    let mu = MeanField::from_vec_unchecked(next);
    match projection {
        Some(net) => net.project(&mu),
        None => Ok(mu),
    }
}

fn mix_mean_field(prev: &[f64], p_hat: &Table, c: f64, out: &mut [f64]) {
    let pushed = push_forward(p_hat, prev);
    for ((o, &m), &g) in out.iter_mut().zip(prev).zip(&pushed) {
        *o = (1.0 - c) * m + c * g;
    }
}

/// One policy step: `(1 - c) pi + c ((1 - psi) softmax(Q) + psi * uniform)`.
pub fn update_policy(prev: &Policy, q: &QTable, c: f64, psi: f64, lambda: f64) -> Result<Policy> {
    if prev.dims() != q.dims() {
        return Err(MfgError::DimensionMismatch {
            expected: format!("{:?}", prev.dims()),
            actual: format!("{:?}", q.dims()),
        });
    }
    let target = softmax_policy(q, lambda)?;
    let mut next = prev.table().clone();
    mix_policy(
        next.as_mut_slice(),
        target.table().as_slice(),
        c,
        psi,
        prev.dims().num_actions,
    );
    Ok(Policy::from_table_unchecked(next))
}

/// In-place policy mix; returns the smallest resulting entry.
fn mix_policy(pi: &mut [f64], soft: &[f64], c: f64, psi: f64, num_actions: usize) -> f64 {
    let noise = psi / num_actions as f64;
    let mut min = f64::INFINITY;
    for (p, &b) in pi.iter_mut().zip(soft) {
        *p = (1.0 - c) * *p + c * ((1.0 - psi) * b + noise);
        min = min.min(*p);
    }
    min
}

/// Which transition estimate drives the mean-field update at steps `t >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateSource {
    /// Counts of the current episode only (reset at every episode boundary).
    #[default]
    WithinEpisode,
    /// The estimate carried over from the end of the previous episode.
    ///
    /// Early in an episode most rows of the within-episode estimate are still
    /// the uniform prior while the step sizes are at their largest, which
    /// biases the mean-field toward uniform. This source avoids that bias.
    Carried,
}

#[derive(Debug, Clone)]
pub struct SandboxConfig {
    pub schedule: ScheduleParams,
    pub episodes: usize,
    pub steps: usize,
    pub rho: f64,
    pub seed: u64,
    /// Net used to project the first-step mean-field of each episode; `None`
    /// disables projection.
    pub net: Option<EpsilonNet>,
    /// Record the exact consistency residual every this many steps (0 = off).
    pub trace_every: usize,
    pub estimate_source: EstimateSource,
}

impl SandboxConfig {
    pub fn new(
        schedule: ScheduleParams,
        episodes: usize,
        steps: usize,
        rho: f64,
        seed: u64,
    ) -> Self {
        Self {
            schedule,
            episodes,
            steps,
            rho,
            seed,
            net: None,
            trace_every: 0,
            estimate_source: EstimateSource::WithinEpisode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.episodes < 2 {
            return Err(MfgError::InvalidParameter(format!(
                "K must be at least 2, got {}",
                self.episodes
            )));
        }
        if self.steps < 2 {
            return Err(MfgError::InvalidParameter(format!(
                "T must be at least 2, got {}",
                self.steps
            )));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(MfgError::InvalidParameter(format!(
                "rho must lie in (0,1), got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

/// Reference quantities used to score each episode against the equilibrium.
#[derive(Debug, Clone)]
pub struct DiagnosticsOracle {
    pub mu_star: MeanField,
    pub lambda: f64,
    pub rho: f64,
    pub q_tol: f64,
    /// Score every `every`-th episode (1 = all).
    pub every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeDiagnostics {
    pub k: usize,
    /// TV distance of the first-step policy to the Boltzmann-optimal policy for the first-step mean-field.
    pub e_pi: Option<f64>,
    /// L1 distance of the first-step mean-field to the equilibrium mean-field.
    pub e_mu: Option<f64>,
    /// Frobenius error of the end-of-episode transition estimate against the true chain.
    pub eps_p: f64,
    /// Sup-norm error of the end-of-episode Q-table against the optimal one.
    pub eps_q: Option<f64>,
    /// L1 consistency residual of the first-step pair under the exact dynamics.
    pub residual_mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: u64,
    pub k: usize,
    pub t: usize,
    pub residual_mu: f64,
}

/// Scores one episode from its first-step pair and end-of-episode estimates.
pub fn episode_diagnostics<E: MfgEnvironment + ?Sized>(
    env: &E,
    k: usize,
    mu_first: &MeanField,
    pi_first: &Policy,
    p_hat_final: &Table,
    q_final: &QTable,
    oracle: Option<&DiagnosticsOracle>,
) -> Result<EpisodeDiagnostics> {
    let kernel = induced_kernel(env, pi_first, mu_first);
    let residual_mu = l1_distance(&push_forward(&kernel, mu_first.probs()), mu_first.probs());
    let eps_p = frobenius_norm(&p_hat_final.sub(&kernel)?);
    let mut out = EpisodeDiagnostics {
        k,
        e_pi: None,
        e_mu: None,
        eps_p,
        eps_q: None,
        residual_mu,
    };
    if let Some(o) = oracle {
        if (k - 1).is_multiple_of(o.every.max(1)) {
            let q_star = induced_q_star(env, mu_first, o.rho, o.q_tol)?;
            let best = softmax_policy(&q_star, o.lambda)?;
            out.e_pi = Some(policy_tv_distance(pi_first, &best)?);
            out.e_mu = Some(l1_distance(mu_first.probs(), o.mu_star.probs()));
            out.eps_q = Some(inf_norm(&q_final.values().sub(q_star.values())?));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SandboxResult {
    pub avg_policy: Policy,
    pub avg_mean_field: MeanField,
    pub per_episode: Vec<EpisodeDiagnostics>,
    /// `mu^k_1` for every episode `k = 1..=K`.
    pub first_mean_fields: Vec<MeanField>,
    /// `pi^k_1` for every episode `k = 1..=K`.
    pub first_policies: Vec<Policy>,
    pub transitions: u64,
    /// Smallest action probability seen at any step `t > 1`.
    pub min_action_prob: f64,
    pub trace: Vec<TracePoint>,
    pub final_state: Checkpoint,
}

struct RunState {
    k: usize,
    t: usize,
    state: usize,
    mu: Vec<f64>,
    pi: Table,
    learner: QLearner,
    counter: TransitionCounter,
    rng: ChaCha8Rng,
}

impl RunState {
    fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(
            self.k,
            self.t,
            self.state,
            self.mu.clone(),
            self.pi.clone(),
            self.learner.clone(),
            self.counter.clone(),
            self.rng.clone(),
        )
    }

    fn diverged(&self, reason: impl Into<String>) -> MfgError {
        let snapshot = self
            .checkpoint()
            .to_json()
            .unwrap_or_else(|e| format!("<unserializable: {e}>"));
        MfgError::Diverged {
            k: self.k,
            t: self.t,
            reason: reason.into(),
            snapshot: Box::new(snapshot),
        }
    }

    fn check_invariants(&self) -> Result<()> {
        let fail = |reason: String| MfgError::InvariantViolated {
            k: self.k,
            t: self.t,
            reason,
        };
        crate::types::check_distribution(&self.mu, SIMPLEX_TOL)
            .map_err(|e| fail(format!("mean-field: {e}")))?;
        self.pi
            .check_row_stochastic(SIMPLEX_TOL)
            .map_err(|e| fail(format!("policy: {e}")))?;
        if !self.learner.q().within_bounds(1e-9) {
            return Err(fail("Q-table left [0, 1/(1-rho)]".into()));
        }
        self.counter
            .estimate()
            .check_row_stochastic(1e-12)
            .map_err(|e| fail(format!("transition estimate: {e}")))?;
        Ok(())
    }
}

/// Runs the full learner and returns the averaged equilibrium estimate with
/// per-episode diagnostics.
pub fn run_sandbox<E: MfgEnvironment + ?Sized>(
    env: &E,
    config: &SandboxConfig,
    oracle: Option<&DiagnosticsOracle>,
) -> Result<SandboxResult> {
    config.validate()?;
    let dims = env.dims();
    let (ns, na) = (dims.num_states, dims.num_actions);
    let sched = &config.schedule;
    let lambda = sched.lambda;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let initial_state = sample_index(env.initial_distribution().probs(), rng.gen());
    let mut run = RunState {
        k: 1,
        t: 0,
        state: initial_state,
        mu: MeanField::uniform(ns).into_vec(),
        pi: Policy::uniform(dims).into_table(),
        learner: QLearner::new(dims, config.rho, sched.c_beta, sched.nu)?,
        counter: TransitionCounter::new(ns),
        rng,
    };
    // Boltzmann policy of the current Q-table; only the row of the updated
    // state changes after each Q-learning step.
    let mut soft = softmax_policy(run.learner.q(), lambda)?.into_table();
    let mut next_mu = vec![0.0; ns];
    let mut min_action_prob = f64::INFINITY;
    let mut first_mean_fields = Vec::with_capacity(config.episodes);
    let mut first_policies = Vec::with_capacity(config.episodes);
    let mut per_episode = Vec::with_capacity(config.episodes);
    let mut trace = Vec::new();
    let mut transitions: u64 = 0;

    for k in 1..=config.episodes {
        run.k = k;
        for t in 1..=config.steps {
            run.t = t;
            let c_mu = sched.step_size_mu(k, t);
            let c_pi = sched.step_size_pi(k, t);
            let psi = sched.exploration_coeff(k, t);

            let p_hat = if t == 1 || config.estimate_source == EstimateSource::Carried {
                run.counter.carried_estimate()
            } else {
                run.counter.estimate()
            };
            mix_mean_field(&run.mu, p_hat, c_mu, &mut next_mu);
            std::mem::swap(&mut run.mu, &mut next_mu);
            if t == 1 {
                if let Some(net) = &config.net {
                    run.mu = net
                        .project(&MeanField::from_vec_unchecked(run.mu.clone()))?
                        .into_vec();
                }
            }
            if !run.mu.iter().sum::<f64>().is_finite() {
                return Err(run.diverged("mean-field became non-finite"));
            }

            let min = mix_policy(run.pi.as_mut_slice(), soft.as_slice(), c_pi, psi, na);
            if !min.is_finite() {
                return Err(run.diverged("policy became non-finite"));
            }
            if t == 1 {
                first_mean_fields.push(MeanField::from_vec_unchecked(run.mu.clone()));
                first_policies.push(Policy::from_table_unchecked(run.pi.clone()));
            } else {
                min_action_prob = min_action_prob.min(min);
            }

            let s = run.state;
            let a = sample_index(run.pi.row(s), run.rng.gen());
            let mu_now = MeanField::from_vec_unchecked(run.mu.clone());
            let (s_next, reward) = crate::env::env_step(env, s, a, &mu_now, &mut run.rng)?;
            transitions += 1;
            run.counter.record(s, s_next)?;
            if let Err(e) = run.learner.update(s, a, reward, s_next) {
                return Err(run.diverged(e.to_string()));
            }
            softmax_into(run.learner.q().row(s), lambda, soft.row_mut(s));
            run.state = s_next;

            if cfg!(debug_assertions) || transitions.is_multiple_of(100) {
                run.check_invariants()?;
            }
            if config.trace_every > 0 && transitions.is_multiple_of(config.trace_every as u64) {
                let pi_now = Policy::from_table_unchecked(run.pi.clone());
                let kernel = induced_kernel(env, &pi_now, &mu_now);
                trace.push(TracePoint {
                    step: transitions,
                    k,
                    t,
                    residual_mu: l1_distance(&push_forward(&kernel, &run.mu), &run.mu),
                });
            }
        }
        per_episode.push(episode_diagnostics(
            env,
            k,
            &first_mean_fields[k - 1],
            &first_policies[k - 1],
            run.counter.estimate(),
            run.learner.q(),
            oracle,
        )?);
        run.counter.reset();
        run.learner.reset_clock();
    }

    let (avg_mean_field, avg_policy) = average_first_steps(
        &first_mean_fields[..config.episodes - 1],
        &first_policies[..config.episodes - 1],
    );
    Ok(SandboxResult {
        avg_policy,
        avg_mean_field,
        per_episode,
        first_mean_fields,
        first_policies,
        transitions,
        min_action_prob,
        trace,
        final_state: run.checkpoint(),
    })
}

fn average_first_steps(mus: &[MeanField], pis: &[Policy]) -> (MeanField, Policy) {
    let n = mus.len() as f64;
    let mut mu = vec![0.0; mus[0].num_states()];
    for m in mus {
        for (acc, x) in mu.iter_mut().zip(m.probs()) {
            *acc += x;
        }
    }
    mu.iter_mut().for_each(|x| *x /= n);
    let dims = pis[0].dims();
    let mut pi = Table::zeros(dims.num_states, dims.num_actions);
    for p in pis {
        for (acc, x) in pi.as_mut_slice().iter_mut().zip(p.table().as_slice()) {
            *acc += x;
        }
    }
    pi.as_mut_slice().iter_mut().for_each(|x| *x /= n);
    (
        MeanField::from_vec_unchecked(mu),
        Policy::from_table_unchecked(pi),
    )
}
