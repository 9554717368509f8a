//! End-to-end checks through the public API only.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sandbox_mfg::{
    build_epsilon_net, gamma1_lambda, gamma2, make_congestion_env, make_fixed_mdp_env,
    run_sandbox, solve_bmfe, CongestionGridParams, MeanField, MfgEnvironment, SandboxConfig,
    ScheduleParams, SolverSettings, Table,
};

fn random_mdp(seed: u64, ns: usize, na: usize) -> sandbox_mfg::FixedMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kernel = Vec::with_capacity(ns * na * ns);
    for _ in 0..ns * na {
        let row: Vec<f64> = (0..ns).map(|_| rng.gen::<f64>() + 0.05).collect();
        let total: f64 = row.iter().sum();
        kernel.extend(row.into_iter().map(|x| x / total));
    }
    let rewards = Table::from_vec(ns, na, (0..ns * na).map(|_| rng.gen()).collect()).unwrap();
    make_fixed_mdp_env(kernel, rewards).unwrap()
}

fn assert_simplex(v: &[f64]) {
    assert!(v.iter().all(|&x| x >= 0.0 && x.is_finite()));
    assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn learner_outputs_stay_on_the_simplex(
        seed in 0u64..1000,
        ns in 2usize..6,
        na in 2usize..4,
    ) {
        let env = random_mdp(seed, ns, na);
        let cfg = SandboxConfig::new(ScheduleParams::default(), 4, 200, 0.7, seed);
        let out = run_sandbox(&env, &cfg, None).unwrap();
        assert_simplex(out.avg_mean_field.probs());
        for s in 0..ns {
            assert_simplex(out.avg_policy.table().row(s));
        }
        prop_assert!(out.min_action_prob > 0.0);
        prop_assert_eq!(out.transitions, 4 * 200);
    }

    #[test]
    fn consistency_map_preserves_the_simplex(seed in 0u64..1000, ns in 2usize..7) {
        let env = random_mdp(seed, ns, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let raw: Vec<f64> = (0..ns).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let mu = MeanField::new(raw.into_iter().map(|x| x / total).collect()).unwrap();
        let pi = gamma1_lambda(&env, &mu, 2.0, 0.7, 1e-10).unwrap();
        assert_simplex(gamma2(&env, &pi, &mu).probs());
    }

    #[test]
    fn projection_lands_on_the_grid(seed in 0u64..1000, ns in 2usize..5) {
        let net = build_epsilon_net(ns, 0.2, 100_000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..ns).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let mu = MeanField::new(raw.into_iter().map(|x| x / total).collect()).unwrap();
        let p = net.project(&mu).unwrap();
        let r = net.resolution() as f64;
        for &x in p.probs() {
            prop_assert!((x * r - (x * r).round()).abs() < 1e-9);
        }
        assert_simplex(p.probs());
    }
}

/// Rebuilds the consistency step by hand from `transition_dist` and checks the
/// solver's mean field is its fixed point.
#[test]
fn solver_mean_field_is_an_independent_fixed_point() {
    let env = make_congestion_env(CongestionGridParams::small()).unwrap();
    let settings = SolverSettings::default();
    let eq = solve_bmfe(&env, &settings).unwrap();
    assert!(eq.converged);
    let mu = &eq.mean_field;
    let dims = env.dims();
    let mut next = vec![0.0; dims.num_states];
    for s in 0..dims.num_states {
        for a in 0..dims.num_actions {
            let w = mu.probs()[s] * eq.policy.table().row(s)[a];
            for (n, p) in next.iter_mut().zip(env.transition_dist(s, a, mu)) {
                *n += w * p;
            }
        }
    }
    let gap: f64 = next.iter().zip(mu.probs()).map(|(a, b)| (a - b).abs()).sum();
    assert!(gap <= 10.0 * settings.tol, "gap {gap}");
}

#[test]
fn same_seed_same_run() {
    let env = random_mdp(3, 4, 2);
    let cfg = SandboxConfig::new(ScheduleParams::default(), 3, 300, 0.7, 42);
    let a = run_sandbox(&env, &cfg, None).unwrap();
    let b = run_sandbox(&env, &cfg, None).unwrap();
    assert_eq!(a.avg_mean_field, b.avg_mean_field);
    assert_eq!(a.avg_policy, b.avg_policy);
    assert_eq!(a.final_state, b.final_state);
}
