//! WebAssembly bindings for the browser demo.
//!
//! Each export takes plain numbers and returns a JSON string. The work is done
//! by the `*_json` functions, which are ordinary Rust and tested natively.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sandbox_mfg::{
    l1_distance, make_congestion_env, policy_tv_distance, probe_contraction, run_sandbox,
    solve_bmfe, CongestionGrid, CongestionGridParams, DiagnosticsOracle, EstimateSource,
    MfgEnvironment, SandboxConfig, ScheduleParams, SolverSettings,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest grid side the page offers; keeps a run under a few seconds.
pub const MAX_SIDE: usize = 6;

fn grid(side: usize, jostle_p: f64, congestion_c: f64) -> Result<CongestionGrid, String> {
    if !(2..=MAX_SIDE).contains(&side) {
        return Err(format!("side must lie in [2, {MAX_SIDE}]"));
    }
    // Favorable cells: the central block, as in the 5x5 layout.
    let lo = side / 2 + side % 2;
    let hi = (lo + 1).min(side);
    let mut favorable = Vec::new();
    for x in lo..=hi {
        for y in lo..=hi {
            favorable.push((x, y));
        }
    }
    make_congestion_env(CongestionGridParams {
        side,
        jostle_p,
        congestion_c,
        favorable_states: favorable,
        ..Default::default()
    })
    .map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Equilibrium {
    side: usize,
    mean_field: Vec<f64>,
    /// Probability of each diagonal move, per state.
    policy: Vec<Vec<f64>>,
    favorable: Vec<usize>,
    residual: f64,
    iterations: usize,
    converged: bool,
}

pub fn equilibrium_json(
    side: usize,
    jostle_p: f64,
    congestion_c: f64,
    lambda: f64,
    rho: f64,
) -> Result<String, String> {
    let env = grid(side, jostle_p, congestion_c)?;
    let settings = SolverSettings {
        lambda,
        rho,
        ..Default::default()
    };
    let eq = solve_bmfe(&env, &settings).map_err(|e| e.to_string())?;
    let params = env.params();
    let out = Equilibrium {
        side,
        mean_field: eq.mean_field.probs().to_vec(),
        policy: eq.policy.table().to_rows(),
        favorable: params
            .favorable_states
            .iter()
            .map(|&(x, y)| params.state_index(x, y))
            .collect(),
        residual: eq.residual_mu,
        iterations: eq.iterations,
        converged: eq.converged,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct LearningCurve {
    e_mu: Vec<f64>,
    e_pi: Vec<f64>,
    residual_mu: Vec<f64>,
    mean_field_l1: f64,
    policy_tv: f64,
    avg_mean_field: Vec<f64>,
    mu_star: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn learn_json(
    side: usize,
    lambda: f64,
    episodes: usize,
    steps: usize,
    seed: u64,
    carried_estimate: bool,
) -> Result<String, String> {
    if episodes * steps > 5_000_000 {
        return Err("K * T is capped at 5e6 in the browser".into());
    }
    let env = grid(side, 0.1, 0.5)?;
    let rho = 0.7;
    let eq = solve_bmfe(
        &env,
        &SolverSettings {
            lambda,
            rho,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let schedule = ScheduleParams {
        lambda,
        ..Default::default()
    };
    let mut cfg = SandboxConfig::new(schedule, episodes, steps, rho, seed);
    if carried_estimate {
        cfg.estimate_source = EstimateSource::Carried;
    }
    let oracle = DiagnosticsOracle {
        mu_star: eq.mean_field.clone(),
        lambda,
        rho,
        q_tol: 1e-10,
        every: 1,
    };
    let out = run_sandbox(&env, &cfg, Some(&oracle)).map_err(|e| e.to_string())?;
    let curve = LearningCurve {
        e_mu: out.per_episode.iter().filter_map(|d| d.e_mu).collect(),
        e_pi: out.per_episode.iter().filter_map(|d| d.e_pi).collect(),
        residual_mu: out.per_episode.iter().map(|d| d.residual_mu).collect(),
        mean_field_l1: l1_distance(out.avg_mean_field.probs(), eq.mean_field.probs()),
        policy_tv: policy_tv_distance(&out.avg_policy, &eq.policy).map_err(|e| e.to_string())?,
        avg_mean_field: out.avg_mean_field.probs().to_vec(),
        mu_star: eq.mean_field.probs().to_vec(),
    };
    serde_json::to_string(&curve).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Probe {
    d1_hat: f64,
    d2_hat: f64,
    d3_hat: f64,
    d_hat: f64,
    contraction_verified: bool,
    num_states: usize,
}

pub fn probe_json(
    side: usize,
    lambda: f64,
    rho: f64,
    pairs: usize,
    seed: u64,
) -> Result<String, String> {
    let env = grid(side, 0.1, 0.5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let est = probe_contraction(&env, lambda, rho, pairs, &mut rng).map_err(|e| e.to_string())?;
    serde_json::to_string(&Probe {
        d1_hat: est.d1_hat,
        d2_hat: est.d2_hat,
        d3_hat: est.d3_hat,
        d_hat: est.d_hat,
        contraction_verified: est.contraction_verified(),
        num_states: env.dims().num_states,
    })
    .map_err(|e| e.to_string())
}

fn to_js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// Exact Boltzmann equilibrium of a congestion grid.
#[wasm_bindgen]
pub fn equilibrium(
    side: usize,
    jostle_p: f64,
    congestion_c: f64,
    lambda: f64,
    rho: f64,
) -> Result<String, JsError> {
    to_js(equilibrium_json(side, jostle_p, congestion_c, lambda, rho))
}

/// Runs the single-path learner and returns per-episode errors.
#[wasm_bindgen]
pub fn learn(
    side: usize,
    lambda: f64,
    episodes: usize,
    steps: usize,
    seed: u64,
    carried_estimate: bool,
) -> Result<String, JsError> {
    to_js(learn_json(
        side,
        lambda,
        episodes,
        steps,
        seed,
        carried_estimate,
    ))
}

/// Empirical contraction constants of the two operators.
#[wasm_bindgen]
pub fn probe(
    side: usize,
    lambda: f64,
    rho: f64,
    pairs: usize,
    seed: u64,
) -> Result<String, JsError> {
    to_js(probe_json(side, lambda, rho, pairs, seed))
}
