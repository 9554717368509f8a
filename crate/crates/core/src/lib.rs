//! Learning Boltzmann mean-field equilibria from a single sample path.
//!
//! The crate has two halves. The learner ([`run_sandbox`]) sees only the
//! trajectory of one generic agent and co-evolves a mean-field estimate, a
//! policy, a transition-count model and a Q-table. The reference side
//! ([`oracle`]) has full access to the environment and computes equilibria
//! and contraction diagnostics exactly, so the learner can be scored.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod env;
pub mod error;
pub mod estimators;
pub mod norms;
pub mod oracle;
pub mod sandbox;
pub mod schedules;
pub mod snapshot;
pub mod types;

pub use env::{
    env_step, is_communicating, make_congestion_env, make_fixed_mdp_env, make_two_class_env,
    reachable_from, sample_index, CongestionGrid, CongestionGridParams, FixedMdp, Kernel,
    MfgEnvironment, GRID_ACTIONS, TRANSIENT_CLASS,
};
pub use error::{MfgError, Result};
pub use estimators::{QLearner, TransitionCounter};
pub use norms::{
    frobenius_norm, inf_norm, l1_distance, l1_norm, policy_tv_distance, softmax_policy,
    softmax_table, tv_norm,
};
pub use oracle::{
    gamma1_argmax, gamma1_lambda, gamma2, induced_kernel, induced_q_star, probe_contraction,
    push_forward, solve_bmfe, stationary_distribution, BmfePair, ContractionEstimate,
    SolverSettings,
};
pub use sandbox::{
    episode_diagnostics, run_sandbox, update_mean_field, update_policy, DiagnosticsOracle,
    EpisodeDiagnostics, EstimateSource, SandboxConfig, SandboxResult, TracePoint,
};
pub use schedules::{build_epsilon_net, EpsilonNet, ExplorationScheme, ScheduleParams};
pub use snapshot::{Checkpoint, EquilibriumDocument, SCHEMA_VERSION};
pub use types::{MeanField, Policy, QTable, StateActionDims, Table, SIMPLEX_TOL};
