//! Norms used to measure policy, mean-field and estimator errors, plus the
//! Boltzmann (softmax) policy map.

use crate::error::{MfgError, Result};
use crate::types::{Policy, QTable, StateActionDims, Table};

/// Total-variation norm of a state-indexed action function: the largest
/// per-state sum of absolute values.
pub fn tv_norm(f: &Table, dims: StateActionDims) -> Result<f64> {
    if f.rows() != dims.num_states || f.cols() != dims.num_actions {
        return Err(MfgError::DimensionMismatch {
            expected: format!("{}x{}", dims.num_states, dims.num_actions),
            actual: format!("{}x{}", f.rows(), f.cols()),
        });
    }
    Ok((0..f.rows())
        .map(|s| f.row(s).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max))
}

/// TV distance between two policies over the same spaces.
pub fn policy_tv_distance(p: &Policy, q: &Policy) -> Result<f64> {
    let diff = p.table().sub(q.table())?;
    tv_norm(&diff, p.dims())
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn frobenius_norm(m: &Table) -> f64 {
    m.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn inf_norm(m: &Table) -> f64 {
    m.as_slice().iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Writes `softmax(lambda * q)` into `out`, shifting by the row maximum first.
pub fn softmax_into(q: &[f64], lambda: f64, out: &mut [f64]) {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &v) in out.iter_mut().zip(q) {
        *o = (lambda * (v - max)).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Boltzmann policy with inverse temperature `lambda` over the rows of `q`.
pub fn softmax_policy(q: &QTable, lambda: f64) -> Result<Policy> {
    softmax_table(q.values(), lambda)
}

pub fn softmax_table(q: &Table, lambda: f64) -> Result<Policy> {
    if lambda.is_nan() || lambda < 0.0 || !lambda.is_finite() {
        return Err(MfgError::InvalidParameter(format!(
            "softmax temperature must be finite and nonnegative, got {lambda}"
        )));
    }
    if !q.is_finite() {
        return Err(MfgError::NonFinite("Q-table passed to softmax".into()));
    }
    let mut out = Table::zeros(q.rows(), q.cols());
    for s in 0..q.rows() {
        softmax_into(q.row(s), lambda, out.row_mut(s));
    }
    Ok(Policy::from_table_unchecked(out))
}
