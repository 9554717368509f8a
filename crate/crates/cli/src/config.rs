//! Experiment configuration: one JSON object, every key optional, unknown
//! keys rejected.

use std::path::{Path, PathBuf};

use sandbox_mfg::{
    build_epsilon_net, make_congestion_env, make_two_class_env, schedules::finest_feasible_mesh,
    CongestionGrid, CongestionGridParams, EpsilonNet, EstimateSource, ExplorationScheme,
    MfgEnvironment, MfgError, SandboxConfig, ScheduleParams, SolverSettings,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Sandbox,
    Oracle,
    Compare,
    Probe,
}

impl std::str::FromStr for Mode {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|_| {
            CliError::Config(format!(
                "unknown mode {s:?} (expected sandbox, oracle, compare or probe)"
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentSpec {
    Congestion(CongestionGridParams),
    /// The congestion grid with transitions into the lower-right corner
    /// class cut off from the rest of the grid.
    TwoClass(CongestionGridParams),
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        Self::Congestion(CongestionGridParams::default())
    }
}

impl EnvironmentSpec {
    pub fn build(&self) -> sandbox_mfg::Result<CongestionGrid> {
        match self {
            Self::Congestion(p) => make_congestion_env(p.clone()),
            Self::TwoClass(p) => make_two_class_env(p.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub environment: EnvironmentSpec,
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
    pub mean_field_estimate: EstimateSource,
    pub use_projection: bool,
    pub epsilon_net_mesh: Option<f64>,
    pub net_budget: usize,
    #[serde(rename = "K")]
    pub episodes: usize,
    #[serde(rename = "T")]
    pub steps: usize,
    pub rho: f64,
    pub seed: u64,
    pub num_seeds: usize,
    pub output_dir: PathBuf,
    /// Score every n-th episode against the oracle; 0 skips the oracle terms.
    pub diagnostics_every: usize,
    /// Write the exact consistency residual every n steps; 0 disables the trace.
    pub trace_every: usize,
    pub oracle_damping: f64,
    pub oracle_tol: f64,
    pub oracle_max_iter: usize,
    pub q_tol: f64,
    pub probe_pairs: usize,
}

impl Default for ExperimentConfig {
    /// The 5x5 congestion experiment with projection off.
    fn default() -> Self {
        let s = ScheduleParams::default();
        let o = SolverSettings::default();
        Self {
            mode: Mode::Sandbox,
            environment: EnvironmentSpec::default(),
            c_mu: s.c_mu,
            c_pi: s.c_pi,
            gamma: s.gamma,
            theta: s.theta,
            zeta: s.zeta,
            c_beta: s.c_beta,
            nu: s.nu,
            psi: s.psi,
            lambda: s.lambda,
            exploration: s.exploration,
            mean_field_estimate: EstimateSource::WithinEpisode,
            use_projection: false,
            epsilon_net_mesh: None,
            net_budget: 1_000_000,
            episodes: 300,
            steps: 50_000,
            rho: 0.7,
            seed: 0,
            num_seeds: 1,
            output_dir: PathBuf::from("out"),
            diagnostics_every: 1,
            trace_every: 0,
            oracle_damping: o.damping,
            oracle_tol: o.tol,
            oracle_max_iter: o.max_iter,
            q_tol: o.q_tol,
            probe_pairs: 1000,
        }
    }
}

impl ExperimentConfig {
    pub fn schedule(&self) -> ScheduleParams {
        ScheduleParams {
            c_mu: self.c_mu,
            c_pi: self.c_pi,
            gamma: self.gamma,
            theta: self.theta,
            zeta: self.zeta,
            c_beta: self.c_beta,
            nu: self.nu,
            psi: self.psi,
            lambda: self.lambda,
            exploration: self.exploration,
        }
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            lambda: self.lambda,
            rho: self.rho,
            damping: self.oracle_damping,
            tol: self.oracle_tol,
            max_iter: self.oracle_max_iter,
            q_tol: self.q_tol,
        }
    }

    /// Learner settings for one seed.
    pub fn sandbox_config(&self, seed: u64, net: Option<EpsilonNet>) -> SandboxConfig {
        let mut cfg =
            SandboxConfig::new(self.schedule(), self.episodes, self.steps, self.rho, seed);
        cfg.trace_every = self.trace_every;
        cfg.estimate_source = self.mean_field_estimate;
        cfg.net = net;
        cfg
    }

    /// The projection net, when enabled. If the requested mesh needs more than
    /// `net_budget` points, the finest affordable mesh is used instead and a
    /// warning is returned.
    pub fn projection_net(&self) -> Result<(Option<EpsilonNet>, Option<String>), CliError> {
        if !self.use_projection {
            return Ok((None, None));
        }
        let mesh = self
            .epsilon_net_mesh
            .ok_or_else(|| CliError::Config("use_projection requires epsilon_net_mesh".into()))?;
        let num_states = self.environment.build()?.dims().num_states;
        match build_epsilon_net(num_states, mesh, self.net_budget) {
            Ok(net) => Ok((Some(net), None)),
            Err(MfgError::NetBudgetExceeded { required, budget }) => {
                let coarse = finest_feasible_mesh(num_states, budget);
                let net = build_epsilon_net(num_states, coarse, budget)?;
                let warning = format!(
                    "warning: mesh {mesh} needs {required:.3e} net points (budget {budget}); using mesh {coarse:.4}"
                );
                Ok((Some(net), Some(warning)))
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Re-checks every constraint, naming the offending key.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        self.schedule()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.environment
            .build()
            .map_err(|e| CliError::Config(format!("environment: {e}")))?;
        if self.episodes < 2 {
            return bad(format!("K must be at least 2, got {}", self.episodes));
        }
        if self.steps < 2 {
            return bad(format!("T must be at least 2, got {}", self.steps));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho must lie in (0,1), got {}", self.rho));
        }
        if self.num_seeds == 0 {
            return bad("num_seeds must be at least 1".into());
        }
        if self.use_projection && self.epsilon_net_mesh.is_none() {
            return bad("use_projection requires epsilon_net_mesh".into());
        }
        if let Some(m) = self.epsilon_net_mesh {
            if !(m > 0.0 && m <= 2.0) {
                return bad(format!("epsilon_net_mesh must lie in (0,2], got {m}"));
            }
        }
        if !(self.oracle_damping > 0.0 && self.oracle_damping <= 1.0) {
            return bad(format!(
                "oracle_damping must lie in (0,1], got {}",
                self.oracle_damping
            ));
        }
        if self.oracle_tol.is_nan()
            || self.oracle_tol <= 0.0
            || self.q_tol.is_nan()
            || self.q_tol <= 0.0
        {
            return bad("oracle_tol and q_tol must be positive".into());
        }
        if self.probe_pairs == 0 {
            return bad("probe_pairs must be at least 1".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    ExperimentConfig::from_json(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
