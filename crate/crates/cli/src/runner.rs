//! Runs one configured experiment and writes its report files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sandbox_mfg::{
    l1_distance, policy_tv_distance, probe_contraction, run_sandbox, solve_bmfe, BmfePair,
    CongestionGrid, DiagnosticsOracle, EpsilonNet, EquilibriumDocument, MfgError, SandboxResult,
    SCHEMA_VERSION,
};

use crate::config::{ExperimentConfig, Mode};
use crate::error::CliError;
use crate::output::{self, Aggregate, ProbeReport, SeedDistance, SeedSummary};

/// Where progress and wall-clock timings go. Timings never enter output
/// files, which keeps those byte-identical across reruns.
pub trait Log: Sync {
    fn info(&self, msg: &str);
}

pub struct Quiet;

impl Log for Quiet {
    fn info(&self, _msg: &str) {}
}

pub struct Stderr;

impl Log for Stderr {
    fn info(&self, msg: &str) {
        eprintln!("{msg}");
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub summaries: Vec<SeedSummary>,
    pub aggregate: Option<Aggregate>,
}

pub fn seed_file(dir: &Path, stem: &str, seed: u64, ext: &str) -> PathBuf {
    dir.join(format!("{stem}_seed{seed}.{ext}"))
}

pub fn run_experiment(cfg: &ExperimentConfig, log: &dyn Log) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let dir = cfg.output_dir.as_path();
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let env = cfg.environment.build()?;
    match cfg.mode {
        Mode::Oracle => {
            let (eq, path) = solve_oracle(cfg, &env, log)?;
            if !eq.converged {
                return Err(MfgError::NoConvergence(eq.iterations).into());
            }
            Ok(RunOutcome {
                files: vec![path],
                ..Default::default()
            })
        }
        Mode::Probe => {
            let start = Instant::now();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let estimate = probe_contraction(&env, cfg.lambda, cfg.rho, cfg.probe_pairs, &mut rng)?;
            let path = dir.join("probe.json");
            output::write_json(
                &path,
                &ProbeReport {
                    schema_version: SCHEMA_VERSION,
                    lambda: cfg.lambda,
                    rho: cfg.rho,
                    seed: cfg.seed,
                    estimate,
                    contraction_verified: estimate.contraction_verified(),
                },
            )?;
            log.info(&format!(
                "probe: d_hat = {:.4} ({:.2?})",
                estimate.d_hat,
                start.elapsed()
            ));
            Ok(RunOutcome {
                files: vec![path],
                ..Default::default()
            })
        }
        Mode::Sandbox | Mode::Compare => {
            let compare = cfg.mode == Mode::Compare;
            let mut files = Vec::new();
            let eq = if compare || cfg.diagnostics_every > 0 {
                let (eq, path) = solve_oracle(cfg, &env, log)?;
                files.push(path);
                Some(eq)
            } else {
                None
            };
            let (net, warning) = cfg.projection_net()?;
            if let Some(w) = warning {
                log.info(&w);
            }
            let seeds: Vec<u64> = (0..cfg.num_seeds as u64).map(|i| cfg.seed + i).collect();
            let results: Vec<Result<(SeedSummary, Vec<PathBuf>), CliError>> = seeds
                .par_iter()
                .map(|&seed| run_seed(cfg, &env, eq.as_ref(), net.as_ref(), seed, log))
                .collect();
            let mut summaries = Vec::new();
            for r in results {
                let (summary, paths) = r?;
                files.extend(paths);
                summaries.push(summary);
            }
            let aggregate = if compare {
                let agg = Aggregate::new(
                    summaries
                        .iter()
                        .map(|s| SeedDistance {
                            seed: s.seed,
                            mean_field_l1: s.mean_field_l1.expect("compare solves the oracle"),
                            policy_tv: s.policy_tv.expect("compare solves the oracle"),
                        })
                        .collect(),
                );
                let path = dir.join("aggregate.json");
                output::write_json(&path, &agg)?;
                files.push(path);
                log.info(&format!(
                    "median over {} seeds: mean-field L1 {:.4}, policy TV {:.4}",
                    summaries.len(),
                    agg.median_mean_field_l1,
                    agg.median_policy_tv
                ));
                Some(agg)
            } else {
                None
            };
            Ok(RunOutcome {
                files,
                summaries,
                aggregate,
            })
        }
    }
}

fn solve_oracle(
    cfg: &ExperimentConfig,
    env: &CongestionGrid,
    log: &dyn Log,
) -> Result<(BmfePair, PathBuf), CliError> {
    let start = Instant::now();
    let eq = solve_bmfe(env, &cfg.solver_settings())?;
    let path = cfg.output_dir.join("oracle.json");
    output::write_json(&path, &EquilibriumDocument::from(&eq))?;
    log.info(&format!(
        "oracle: {} iterations, residual {:.2e}, converged {} ({:.2?})",
        eq.iterations,
        eq.residual_mu,
        eq.converged,
        start.elapsed()
    ));
    Ok((eq, path))
}

fn run_seed(
    cfg: &ExperimentConfig,
    env: &CongestionGrid,
    eq: Option<&BmfePair>,
    net: Option<&EpsilonNet>,
    seed: u64,
    log: &dyn Log,
) -> Result<(SeedSummary, Vec<PathBuf>), CliError> {
    let dir = cfg.output_dir.as_path();
    let start = Instant::now();
    let sandbox = cfg.sandbox_config(seed, net.cloned());
    let oracle = match eq {
        Some(eq) if cfg.diagnostics_every > 0 => Some(DiagnosticsOracle {
            mu_star: eq.mean_field.clone(),
            lambda: cfg.lambda,
            rho: cfg.rho,
            q_tol: cfg.q_tol,
            every: cfg.diagnostics_every,
        }),
        _ => None,
    };
    let result = match run_sandbox(env, &sandbox, oracle.as_ref()) {
        Ok(r) => r,
        Err(MfgError::Diverged {
            k,
            t,
            reason,
            snapshot,
        }) => {
            output::write_text(&seed_file(dir, "diverged", seed, "json"), &snapshot)?;
            return Err(MfgError::Diverged {
                k,
                t,
                reason,
                snapshot,
            }
            .into());
        }
        Err(e) => return Err(e.into()),
    };
    let summary = summarize(cfg, seed, &result, eq)?;

    let mut files = Vec::new();
    let csv = seed_file(dir, "episodes", seed, "csv");
    output::write_episodes_csv(&csv, &result.per_episode)?;
    files.push(csv);
    let json = seed_file(dir, "summary", seed, "json");
    output::write_json(&json, &summary)?;
    files.push(json);
    let checkpoint = seed_file(dir, "checkpoint", seed, "json");
    output::write_text(&checkpoint, &(result.final_state.to_json()? + "\n"))?;
    files.push(checkpoint);
    if cfg.trace_every > 0 {
        let trace = seed_file(dir, "trace", seed, "csv");
        output::write_trace_csv(&trace, &result.trace)?;
        files.push(trace);
    }
    let distances = match (summary.mean_field_l1, summary.policy_tv) {
        (Some(m), Some(p)) => format!(", mean-field L1 {m:.4}, policy TV {p:.4}"),
        _ => String::new(),
    };
    log.info(&format!(
        "seed {seed}: {} transitions{distances} ({:.2?})",
        result.transitions,
        start.elapsed()
    ));
    Ok((summary, files))
}

fn summarize(
    cfg: &ExperimentConfig,
    seed: u64,
    result: &SandboxResult,
    eq: Option<&BmfePair>,
) -> Result<SeedSummary, CliError> {
    let (mean_field_l1, policy_tv) = match eq {
        Some(eq) => (
            Some(l1_distance(
                result.avg_mean_field.probs(),
                eq.mean_field.probs(),
            )),
            Some(policy_tv_distance(&result.avg_policy, &eq.policy)?),
        ),
        None => (None, None),
    };
    Ok(SeedSummary {
        schema_version: SCHEMA_VERSION,
        seed,
        episodes: cfg.episodes,
        steps: cfg.steps,
        transitions: result.transitions,
        avg_mean_field: result.avg_mean_field.clone(),
        avg_policy: result.avg_policy.clone(),
        min_action_prob: result.min_action_prob,
        mean_field_l1,
        policy_tv,
    })
}
