//! Exact operators with full model access: optimal Q-functions of the
//! mean-field-induced MDP, the Boltzmann optimality map, the population
//! push-forward, a damped equilibrium solver and an empirical probe of the
//! Lipschitz constants of those maps.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::MfgEnvironment;
use crate::error::{MfgError, Result};
use crate::norms::{l1_distance, policy_tv_distance, softmax_policy};
use crate::types::{MeanField, Policy, QTable, Table};

const VALUE_ITERATION_CAP: usize = 100_000;

/// Optimal Q-function of the MDP obtained by freezing the mean-field at `mu`.
///
/// Iterates the Bellman optimality operator from zero until successive
/// iterates differ by at most `tol (1 - rho) / rho` in sup norm, which puts
/// the result within `tol` of the fixed point.
pub fn induced_q_star<E: MfgEnvironment + ?Sized>(
    env: &E,
    mu: &MeanField,
    rho: f64,
    tol: f64,
) -> Result<QTable> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(MfgError::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let dims = env.dims();
    let (ns, na) = (dims.num_states, dims.num_actions);
    let mut kernel = vec![0.0; ns * na * ns];
    let mut rewards = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            env.transition_into(s, a, mu, &mut kernel[(s * na + a) * ns..][..ns]);
            rewards[s * na + a] = env.reward(s, a, mu);
        }
    }
    let stop = tol * (1.0 - rho) / rho;
    let mut q = vec![0.0; ns * na];
    let mut next = vec![0.0; ns * na];
    let mut v = vec![0.0; ns];
    for _ in 0..VALUE_ITERATION_CAP {
        for s in 0..ns {
            v[s] = q[s * na..(s + 1) * na]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
        }
        let mut change: f64 = 0.0;
        for (i, out) in next.iter_mut().enumerate() {
            let row = &kernel[i * ns..(i + 1) * ns];
            let ev: f64 = row.iter().zip(&v).map(|(p, x)| p * x).sum();
            *out = rewards[i] + rho * ev;
            change = change.max((*out - q[i]).abs());
        }
        std::mem::swap(&mut q, &mut next);
        if !change.is_finite() {
            return Err(MfgError::NonFinite("value iteration".into()));
        }
        if change <= stop {
            return QTable::new(Table::from_vec(ns, na, q)?, rho);
        }
    }
    Err(MfgError::NoConvergence(VALUE_ITERATION_CAP))
}

/// Boltzmann policy of the optimal Q-function induced by `mu`.
pub fn gamma1_lambda<E: MfgEnvironment + ?Sized>(
    env: &E,
    mu: &MeanField,
    lambda: f64,
    rho: f64,
    tol: f64,
) -> Result<Policy> {
    softmax_policy(&induced_q_star(env, mu, rho, tol)?, lambda)
}

/// Greedy limit of [`gamma1_lambda`]: probability split evenly among actions
/// whose value is within `tie_tol` of the row maximum.
pub fn gamma1_argmax<E: MfgEnvironment + ?Sized>(
    env: &E,
    mu: &MeanField,
    rho: f64,
    tol: f64,
    tie_tol: f64,
) -> Result<Policy> {
    let q = induced_q_star(env, mu, rho, tol)?;
    let dims = q.dims();
    let mut t = Table::zeros(dims.num_states, dims.num_actions);
    for s in 0..dims.num_states {
        let (_, best) = q.max_action(s);
        let winners: Vec<usize> = (0..dims.num_actions)
            .filter(|&a| q.get(s, a) >= best - tie_tol)
            .collect();
        for &a in &winners {
            t[(s, a)] = 1.0 / winners.len() as f64;
        }
    }
    Policy::new(t)
}

/// State chain `P(s, s') = sum_a pi(a|s) P(s'|s,a,mu)`.
pub fn induced_kernel<E: MfgEnvironment + ?Sized>(env: &E, pi: &Policy, mu: &MeanField) -> Table {
    let dims = env.dims();
    let ns = dims.num_states;
    let mut out = Table::zeros(ns, ns);
    let mut row = vec![0.0; ns];
    for s in 0..ns {
        for a in 0..dims.num_actions {
            let w = pi.prob(s, a);
            if w == 0.0 {
                continue;
            }
            env.transition_into(s, a, mu, &mut row);
            for (o, p) in out.row_mut(s).iter_mut().zip(&row) {
                *o += w * p;
            }
        }
    }
    out
}

/// `m' = P^T m` for a row-stochastic `p`.
pub fn push_forward(p: &Table, m: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.cols()];
    for (i, &w) in m.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (o, x) in out.iter_mut().zip(p.row(i)) {
            *o += w * x;
        }
    }
    out
}

/// Population distribution one step after `mu` when every agent follows `pi`.
pub fn gamma2<E: MfgEnvironment + ?Sized>(env: &E, pi: &Policy, mu: &MeanField) -> MeanField {
    let next = push_forward(&induced_kernel(env, pi, mu), mu.probs());
    let total: f64 = next.iter().sum();
    MeanField::from_vec_unchecked(next.into_iter().map(|x| x / total).collect())
}

/// Stationary distribution of a row-stochastic matrix, by solving
/// `(P^T - I) x = 0` with one equation replaced by `sum x = 1`
/// (Gaussian elimination with partial pivoting).
#[allow(clippy::needless_range_loop)]
pub fn stationary_distribution(p: &Table) -> Result<MeanField> {
    let n = p.rows();
    if p.cols() != n {
        return Err(MfgError::DimensionMismatch {
            expected: "square matrix".into(),
            actual: format!("{}x{}", p.rows(), p.cols()),
        });
    }
    let mut a = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = p[(j, i)] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[n - 1][j] = 1.0;
    }
    a[n - 1][n] = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap_or(col);
        if a[pivot][col].abs() < 1e-14 {
            return Err(MfgError::InvalidParameter(
                "chain has no unique stationary distribution".into(),
            ));
        }
        a.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                if f != 0.0 {
                    for k in col..=n {
                        a[row][k] -= f * a[col][k];
                    }
                }
            }
        }
    }
    let x: Vec<f64> = (0..n).map(|i| (a[i][n] / a[i][i]).max(0.0)).collect();
    let total: f64 = x.iter().sum();
    MeanField::new(x.into_iter().map(|v| v / total).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub lambda: f64,
    pub rho: f64,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Value-iteration accuracy for each evaluation of the optimality map.
    pub q_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            rho: 0.7,
            damping: 0.5,
            tol: 1e-8,
            max_iter: 100_000,
            q_tol: 1e-10,
        }
    }
}

/// Boltzmann mean-field equilibrium with its defining residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmfePair {
    pub policy: Policy,
    pub mean_field: MeanField,
    pub residual_policy: f64,
    pub residual_mu: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Damped fixed-point iteration `mu <- (1 - d) mu + d Gamma2(Gamma1(mu), mu)`
/// from the uniform mean-field.
///
/// Stops at the first iterate whose consistency residual is at most `tol`.
/// When `max_iter` runs out, the iterate with the smallest residual is
/// returned with `converged = false`.
pub fn solve_bmfe<E: MfgEnvironment + ?Sized>(
    env: &E,
    settings: &SolverSettings,
) -> Result<BmfePair> {
    let SolverSettings {
        lambda,
        rho,
        damping,
        tol,
        max_iter,
        q_tol,
    } = *settings;
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(MfgError::InvalidParameter(format!(
            "damping must lie in (0,1], got {damping}"
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(MfgError::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let ns = env.dims().num_states;
    let mut mu = MeanField::uniform(ns);
    let mut best: Option<(f64, MeanField, Policy)> = None;
    for iter in 0..=max_iter {
        let pi = gamma1_lambda(env, &mu, lambda, rho, q_tol)?;
        let image = gamma2(env, &pi, &mu);
        let residual = l1_distance(image.probs(), mu.probs());
        if residual <= tol {
            return Ok(BmfePair {
                residual_policy: policy_tv_distance(
                    &pi,
                    &gamma1_lambda(env, &mu, lambda, rho, q_tol)?,
                )?,
                policy: pi,
                mean_field: mu,
                residual_mu: residual,
                iterations: iter,
                converged: true,
            });
        }
        if best.as_ref().is_none_or(|(r, _, _)| residual < *r) {
            best = Some((residual, mu.clone(), pi));
        }
        let next: Vec<f64> = mu
            .probs()
            .iter()
            .zip(image.probs())
            .map(|(m, g)| (1.0 - damping) * m + damping * g)
            .collect();
        mu = MeanField::from_vec_unchecked(next);
    }
    let (residual, mean_field, policy) = best.expect("at least one iterate");
    Ok(BmfePair {
        residual_policy: 0.0,
        policy,
        mean_field,
        residual_mu: residual,
        iterations: max_iter,
        converged: false,
    })
}

/// Empirical Lipschitz ratios of the optimality and consistency maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionEstimate {
    pub d1_hat: f64,
    pub d2_hat: f64,
    pub d3_hat: f64,
    pub d_hat: f64,
    pub num_pairs: usize,
}

impl ContractionEstimate {
    pub fn contraction_verified(&self) -> bool {
        self.d_hat < 1.0
    }
}

/// Symmetric Dirichlet(1) sample (uniform on the simplex).
pub fn random_simplex_point<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

pub fn random_mean_field<R: Rng + ?Sized>(rng: &mut R, n: usize) -> MeanField {
    MeanField::from_vec_unchecked(random_simplex_point(rng, n))
}

pub fn random_policy<R: Rng + ?Sized>(
    rng: &mut R,
    num_states: usize,
    num_actions: usize,
) -> Policy {
    let data = (0..num_states)
        .flat_map(|_| random_simplex_point(rng, num_actions))
        .collect();
    Policy::from_table_unchecked(Table::from_vec(num_states, num_actions, data).expect("shape"))
}

const PROBE_MIN_DENOMINATOR: f64 = 1e-9;

/// Samples `num_pairs` random pairs for each of the three ratios and keeps
/// the largest value observed. This is a lower estimate of the true constants.
pub fn probe_contraction<E: MfgEnvironment + ?Sized, R: Rng + ?Sized>(
    env: &E,
    lambda: f64,
    rho: f64,
    num_pairs: usize,
    rng: &mut R,
) -> Result<ContractionEstimate> {
    if num_pairs == 0 {
        return Err(MfgError::InvalidParameter(
            "probe needs at least one pair".into(),
        ));
    }
    let dims = env.dims();
    let (ns, na) = (dims.num_states, dims.num_actions);
    let q_tol = 1e-10;
    let (mut d1, mut d2, mut d3) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..num_pairs {
        let mu = random_mean_field(rng, ns);
        let mu2 = random_mean_field(rng, ns);
        let dmu = l1_distance(mu.probs(), mu2.probs());
        if dmu >= PROBE_MIN_DENOMINATOR {
            let p1 = gamma1_lambda(env, &mu, lambda, rho, q_tol)?;
            let p2 = gamma1_lambda(env, &mu2, lambda, rho, q_tol)?;
            d1 = d1.max(policy_tv_distance(&p1, &p2)? / dmu);
        }

        let mu = random_mean_field(rng, ns);
        let pi = random_policy(rng, ns, na);
        let pi2 = random_policy(rng, ns, na);
        let dpi = policy_tv_distance(&pi, &pi2)?;
        if dpi >= PROBE_MIN_DENOMINATOR {
            let g1 = gamma2(env, &pi, &mu);
            let g2 = gamma2(env, &pi2, &mu);
            d2 = d2.max(l1_distance(g1.probs(), g2.probs()) / dpi);
        }

        let pi = random_policy(rng, ns, na);
        let mu = random_mean_field(rng, ns);
        let mu2 = random_mean_field(rng, ns);
        let dmu = l1_distance(mu.probs(), mu2.probs());
        if dmu >= PROBE_MIN_DENOMINATOR {
            let g1 = gamma2(env, &pi, &mu);
            let g2 = gamma2(env, &pi, &mu2);
            d3 = d3.max(l1_distance(g1.probs(), g2.probs()) / dmu);
        }
    }
    Ok(ContractionEstimate {
        d1_hat: d1,
        d2_hat: d2,
        d3_hat: d3,
        d_hat: d1 * d2 + d3,
        num_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_congestion_env, make_fixed_mdp_env, CongestionGridParams, FixedMdp};
    use crate::norms::inf_norm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_mdp(seed: u64, ns: usize, na: usize) -> FixedMdp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kernel: Vec<f64> = (0..ns * na)
            .flat_map(|_| random_simplex_point(&mut rng, ns))
            .collect();
        let rewards =
            Table::from_vec(ns, na, (0..ns * na).map(|_| rng.gen::<f64>()).collect()).unwrap();
        make_fixed_mdp_env(kernel, rewards).unwrap()
    }

    fn bellman_residual(env: &FixedMdp, q: &QTable) -> f64 {
        let d = env.dims();
        let mut worst: f64 = 0.0;
        for s in 0..d.num_states {
            for a in 0..d.num_actions {
                let ev: f64 = (0..d.num_states)
                    .map(|j| env.kernel().row(s, a)[j] * q.max_action(j).1)
                    .sum();
                let target = env.rewards()[(s, a)] + q.rho() * ev;
                worst = worst.max((target - q.get(s, a)).abs());
            }
        }
        worst
    }

    #[test]
    fn single_state_value_is_geometric_series() {
        let env = make_fixed_mdp_env(vec![1.0], Table::filled(1, 1, 1.0)).unwrap();
        let q = induced_q_star(&env, &MeanField::uniform(1), 0.7, 1e-12).unwrap();
        assert!((q.get(0, 0) - 10.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rewards_give_zero_values() {
        let mut env = random_mdp(1, 4, 3);
        env = make_fixed_mdp_env(env.kernel().as_slice().to_vec(), Table::zeros(4, 3)).unwrap();
        let q = induced_q_star(&env, &MeanField::uniform(4), 0.9, 1e-10).unwrap();
        assert_eq!(inf_norm(q.values()), 0.0);
    }

    #[test]
    fn value_iteration_solves_bellman_equation() {
        for seed in 0..5 {
            let env = random_mdp(seed, 5, 3);
            let tol = 1e-9;
            let q = induced_q_star(&env, &MeanField::uniform(5), 0.7, tol).unwrap();
            assert!(bellman_residual(&env, &q) <= tol);
        }
        assert!(induced_q_star(&random_mdp(0, 2, 2), &MeanField::uniform(2), 0.7, 0.0).is_err());
    }

    #[test]
    fn q_star_is_monotone_in_rewards() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..20 {
            let env = random_mdp(seed, 5, 2);
            let mu = MeanField::uniform(5);
            let base = induced_q_star(&env, &mu, 0.7, 1e-11).unwrap();
            let mut rewards = env.rewards().clone();
            let (s, a) = (rng.gen_range(0..5), rng.gen_range(0..2));
            rewards[(s, a)] = (rewards[(s, a)] + rng.gen::<f64>() * 0.5).min(1.0);
            let raised = make_fixed_mdp_env(env.kernel().as_slice().to_vec(), rewards).unwrap();
            let q2 = induced_q_star(&raised, &mu, 0.7, 1e-11).unwrap();
            for (x, y) in base.values().as_slice().iter().zip(q2.values().as_slice()) {
                assert!(*y >= x - 1e-10);
            }
        }
    }

    #[test]
    fn gamma1_small_temperature_is_near_uniform() {
        let env = random_mdp(2, 4, 3);
        let p = gamma1_lambda(&env, &MeanField::uniform(4), 1e-12, 0.7, 1e-10).unwrap();
        for &x in p.table().as_slice() {
            assert!((x - 1.0 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gamma1_two_action_example() {
        // Single state, rewards (1, 0), rho = 0.5: Q* = (2, 1), a unit gap.
        let rho = 0.5;
        let env = make_fixed_mdp_env(
            vec![1.0, 1.0],
            Table::from_rows(vec![vec![1.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let q = induced_q_star(&env, &MeanField::uniform(1), rho, 1e-13).unwrap();
        assert!((q.get(0, 0) - 2.0).abs() < 1e-12 && (q.get(0, 1) - 1.0).abs() < 1e-12);
        let p = gamma1_lambda(&env, &MeanField::uniform(1), 3f64.ln(), rho, 1e-13).unwrap();
        assert!((p.prob(0, 0) - 0.75).abs() < 1e-12);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn gamma1_concentrates_with_temperature() {
        let env = random_mdp(4, 4, 3);
        let mu = MeanField::uniform(4);
        let q = induced_q_star(&env, &mu, 0.7, 1e-12).unwrap();
        let mut last = [0.0; 4];
        for lambda in [1.0, 10.0, 100.0] {
            let p = gamma1_lambda(&env, &mu, lambda, 0.7, 1e-12).unwrap();
            for s in 0..4 {
                let best = q.max_action(s).0;
                let off: f64 = 1.0 - p.prob(s, best);
                if lambda > 1.0 {
                    assert!(off <= last[s] + 1e-15);
                }
                last[s] = off;
            }
        }
        for (s, off) in last.iter().enumerate() {
            let mut row = q.row(s).to_vec();
            row.sort_by(|a, b| b.total_cmp(a));
            let gap = row[0] - row[1];
            assert!(
                *off <= 3.0 * (-100.0 * gap).exp() + 1e-15,
                "state {s}: {off} with gap {gap}"
            );
        }
        let greedy = gamma1_argmax(&env, &mu, 0.7, 1e-12, 1e-9).unwrap();
        for s in 0..4 {
            assert_eq!(greedy.prob(s, q.max_action(s).0), 1.0);
        }
    }

    #[test]
    fn argmax_splits_ties_evenly() {
        let env = make_fixed_mdp_env(
            vec![1.0; 3],
            Table::from_rows(vec![vec![0.5, 0.5, 0.2]]).unwrap(),
        )
        .unwrap();
        let p = gamma1_argmax(&env, &MeanField::uniform(1), 0.7, 1e-12, 1e-9).unwrap();
        assert_eq!(p.row(0), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn gamma2_examples() {
        // Identity kernel.
        let mut k = Vec::new();
        for s in 0..3 {
            for _ in 0..2 {
                let mut row = vec![0.0; 3];
                row[s] = 1.0;
                k.extend(row);
            }
        }
        let env = make_fixed_mdp_env(k, Table::zeros(3, 2)).unwrap();
        let mu = MeanField::new(vec![0.2, 0.3, 0.5]).unwrap();
        let pi = Policy::uniform(env.dims());
        assert_eq!(gamma2(&env, &pi, &mu), mu);

        // Everything absorbed into state 0.
        let env = make_fixed_mdp_env([1.0, 0.0].repeat(4), Table::zeros(2, 2)).unwrap();
        let mu = MeanField::new(vec![0.3, 0.7]).unwrap();
        let pi = Policy::deterministic(2, &[1, 0]).unwrap();
        assert_eq!(gamma2(&env, &pi, &mu).probs(), &[1.0, 0.0]);
    }

    #[test]
    fn gamma2_iteration_reaches_stationary_distribution() {
        let env = random_mdp(7, 5, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pi = random_policy(&mut rng, 5, 2);
        let stationary =
            stationary_distribution(&induced_kernel(&env, &pi, &MeanField::uniform(5))).unwrap();
        let mut mu = random_mean_field(&mut rng, 5);
        for _ in 0..500 {
            mu = gamma2(&env, &pi, &mu);
            assert!((mu.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(l1_distance(mu.probs(), stationary.probs()) < 1e-10);
    }

    #[test]
    fn induced_kernel_of_deterministic_policy() {
        let params = CongestionGridParams {
            jostle_p: 0.0,
            ..CongestionGridParams::small()
        };
        let env = make_congestion_env(params).unwrap();
        let pi = Policy::deterministic(4, &[3; 9]).unwrap();
        let p = induced_kernel(&env, &pi, &MeanField::uniform(9));
        for s in 0..9 {
            let ones = p.row(s).iter().filter(|&&x| x == 1.0).count();
            let zeros = p.row(s).iter().filter(|&&x| x == 0.0).count();
            assert_eq!((ones, zeros), (1, 8));
        }
    }

    #[test]
    fn stationary_solver_rejects_reducible_chains() {
        assert!(stationary_distribution(&Table::identity(3)).is_err());
        assert!(stationary_distribution(&Table::zeros(2, 3)).is_err());
    }

    #[test]
    fn bmfe_on_single_state() {
        let env = make_fixed_mdp_env(
            vec![1.0, 1.0],
            Table::from_rows(vec![vec![0.3, 0.9]]).unwrap(),
        )
        .unwrap();
        let out = solve_bmfe(&env, &SolverSettings::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.mean_field.probs(), &[1.0]);
    }

    #[test]
    fn bmfe_on_mean_field_independent_env() {
        let env = random_mdp(3, 5, 2);
        let settings = SolverSettings {
            tol: 1e-11,
            ..SolverSettings::default()
        };
        let out = solve_bmfe(&env, &settings).unwrap();
        assert!(out.converged);
        let pi = gamma1_lambda(
            &env,
            &MeanField::uniform(5),
            settings.lambda,
            settings.rho,
            1e-12,
        )
        .unwrap();
        let stationary =
            stationary_distribution(&induced_kernel(&env, &pi, &MeanField::uniform(5))).unwrap();
        assert!(l1_distance(out.mean_field.probs(), stationary.probs()) < 1e-9);
    }

    #[test]
    fn bmfe_on_congestion_grid_is_a_fixed_point() {
        let env = make_congestion_env(CongestionGridParams::small()).unwrap();
        let settings = SolverSettings {
            lambda: 0.5,
            ..SolverSettings::default()
        };
        let out = solve_bmfe(&env, &settings).unwrap();
        assert!(out.converged);
        assert!(out.residual_mu <= settings.tol);
        assert!(out.residual_policy <= settings.tol);
        let pi = gamma1_lambda(&env, &out.mean_field, 0.5, 0.7, 1e-10).unwrap();
        let again = gamma2(&env, &pi, &out.mean_field);
        assert!(l1_distance(again.probs(), out.mean_field.probs()) <= 2.0 * settings.tol);
    }

    #[test]
    fn bmfe_reports_non_convergence() {
        let env = make_congestion_env(CongestionGridParams::small()).unwrap();
        let settings = SolverSettings {
            max_iter: 2,
            tol: 1e-14,
            ..SolverSettings::default()
        };
        let out = solve_bmfe(&env, &settings).unwrap();
        assert!(!out.converged);
        assert!(out.residual_mu > 0.0);
        assert!(solve_bmfe(
            &env,
            &SolverSettings {
                damping: 0.0,
                ..settings.clone()
            }
        )
        .is_err());
    }

    #[test]
    fn probe_on_mean_field_independent_env() {
        let env = random_mdp(5, 5, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let est = probe_contraction(&env, 1.0, 0.7, 50, &mut rng).unwrap();
        assert_eq!(est.d1_hat, 0.0);
        assert!(est.d3_hat <= 1.0 + 1e-12);
        assert!(est.d_hat.is_finite());
        let cold = probe_contraction(
            &make_congestion_env(CongestionGridParams::small()).unwrap(),
            0.0,
            0.7,
            20,
            &mut rng,
        )
        .unwrap();
        assert_eq!(cold.d1_hat, 0.0);
        assert!(probe_contraction(&env, 1.0, 0.7, 0, &mut rng).is_err());
    }
}
