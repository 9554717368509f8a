//! Versioned JSON documents for learner checkpoints and equilibria.
//!
//! Both documents encode a mean-field as a flat array under `mean_field` and a
//! policy as an array of per-state rows under `policy`.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};
use crate::estimators::{QLearner, TransitionCounter};
use crate::oracle::BmfePair;
use crate::types::{MeanField, Policy, Table};

pub const SCHEMA_VERSION: u32 = 1;

/// Full learner state at step `(k, t)`.
///
/// Field order is the serialized key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub k: usize,
    pub t: usize,
    /// Current state of the sampled agent.
    pub state: usize,
    pub mean_field: Vec<f64>,
    pub policy: Table,
    /// Q-table, discount, per-episode clock and step-size constants.
    pub q_learner: QLearner,
    /// Pair and state visit counts with the current and carried estimates.
    pub counts: TransitionCounter,
    pub rng: ChaCha8Rng,
}

impl Checkpoint {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        k: usize,
        t: usize,
        state: usize,
        mean_field: Vec<f64>,
        policy: Table,
        q_learner: QLearner,
        counts: TransitionCounter,
        rng: ChaCha8Rng,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            k,
            t,
            state,
            mean_field,
            policy,
            q_learner,
            counts,
            rng,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let out: Self = serde_json::from_str(text)?;
        check_version(out.schema_version)?;
        Ok(out)
    }
}

/// An equilibrium pair with its residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumDocument {
    pub schema_version: u32,
    pub mean_field: MeanField,
    pub policy: Policy,
    pub residual_policy: f64,
    pub residual_mu: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl From<&BmfePair> for EquilibriumDocument {
    fn from(p: &BmfePair) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            mean_field: p.mean_field.clone(),
            policy: p.policy.clone(),
            residual_policy: p.residual_policy,
            residual_mu: p.residual_mu,
            iterations: p.iterations,
            converged: p.converged,
        }
    }
}

impl EquilibriumDocument {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let out: Self = serde_json::from_str(text)?;
        check_version(out.schema_version)?;
        Ok(out)
    }
}

fn check_version(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(MfgError::InvalidParameter(format!(
            "unsupported schema_version {v}, expected {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::StateActionDims;
    use rand::SeedableRng;

    fn sample() -> Checkpoint {
        let dims = StateActionDims::new(2, 3).unwrap();
        let mut counts = TransitionCounter::new(2);
        counts.record(0, 1).unwrap();
        Checkpoint::new(
            3,
            7,
            1,
            vec![0.25, 0.75],
            Policy::uniform(dims).into_table(),
            QLearner::new(dims, 0.7, 5.0, 0.55).unwrap(),
            counts,
            ChaCha8Rng::seed_from_u64(11),
        )
    }

    #[test]
    fn checkpoint_round_trip() {
        let c = sample();
        let text = c.to_json().unwrap();
        assert_eq!(Checkpoint::from_json(&text).unwrap(), c);
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        let keys: Vec<_> = value.as_object().unwrap().keys().cloned().collect();
        for key in [
            "schema_version",
            "k",
            "t",
            "state",
            "mean_field",
            "policy",
            "q_learner",
            "counts",
            "rng",
        ] {
            assert!(keys.iter().any(|k| k == key), "missing {key}");
        }
    }

    #[test]
    fn rejects_other_versions() {
        let mut c = sample();
        c.schema_version = 9;
        assert!(Checkpoint::from_json(&c.to_json().unwrap()).is_err());
    }

    #[test]
    fn shared_encoding() {
        let c = sample();
        let doc = EquilibriumDocument {
            schema_version: SCHEMA_VERSION,
            mean_field: MeanField::new(c.mean_field.clone()).unwrap(),
            policy: Policy::new(c.policy.clone()).unwrap(),
            residual_policy: 0.0,
            residual_mu: 0.0,
            iterations: 1,
            converged: true,
        };
        let a: serde_json::Value = serde_json::from_str(&c.to_json().unwrap()).unwrap();
        let b: serde_json::Value = serde_json::from_str(&doc.to_json().unwrap()).unwrap();
        assert_eq!(a["mean_field"], b["mean_field"]);
        assert_eq!(a["policy"], b["policy"]);
        assert_eq!(
            EquilibriumDocument::from_json(&doc.to_json().unwrap()).unwrap(),
            doc
        );
    }
}
