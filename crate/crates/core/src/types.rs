//! Domain types: dense real tables, mean-fields, policies and Q-tables.

use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};

/// Absolute tolerance for simplex and row-stochasticity checks.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateActionDims {
    pub num_states: usize,
    pub num_actions: usize,
}

impl StateActionDims {
    pub fn new(num_states: usize, num_actions: usize) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(MfgError::InvalidParameter(format!(
                "state and action counts must be positive (got S={num_states}, A={num_actions})"
            )));
        }
        Ok(Self {
            num_states,
            num_actions,
        })
    }
}

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct Table {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Table {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t[(i, i)] = 1.0;
        }
        t
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(MfgError::DimensionMismatch {
                expected: format!("{rows}x{cols} = {} entries", rows * cols),
                actual: format!("{} entries", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * m);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != m {
                return Err(MfgError::DimensionMismatch {
                    expected: format!("{m} columns"),
                    actual: format!("{} columns in row {i}", row.len()),
                });
            }
            data.extend(row);
        }
        Ok(Self {
            rows: n,
            cols: m,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.cols.max(1))
            .map(<[f64]>::to_vec)
            .collect()
    }

    fn check_same_shape(&self, other: &Table) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(MfgError::DimensionMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                actual: format!("{}x{}", other.rows, other.cols),
            });
        }
        Ok(())
    }

    /// Entrywise `self - other`.
    pub fn sub(&self, other: &Table) -> Result<Table> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Table {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, factor: f64) -> Table {
        Table {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    pub fn add(&self, other: &Table) -> Result<Table> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Table {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Checks every row is a probability vector within `tol`.
    pub fn check_row_stochastic(&self, tol: f64) -> Result<()> {
        for i in 0..self.rows {
            check_distribution(self.row(i), tol).map_err(|e| match e {
                MfgError::NotStochastic(msg) => MfgError::NotStochastic(format!("row {i}: {msg}")),
                other => other,
            })?;
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for Table {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Table {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl From<Table> for Vec<Vec<f64>> {
    fn from(t: Table) -> Self {
        t.to_rows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Table {
    type Error = MfgError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Table::from_rows(rows)
    }
}

pub(crate) fn check_distribution(p: &[f64], tol: f64) -> Result<()> {
    let mut sum = 0.0;
    for (j, &x) in p.iter().enumerate() {
        if !x.is_finite() {
            return Err(MfgError::NotStochastic(format!("entry {j} is {x}")));
        }
        if x < -tol || x > 1.0 + tol {
            return Err(MfgError::NotStochastic(format!(
                "entry {j} = {x} outside [0,1]"
            )));
        }
        sum += x;
    }
    if (sum - 1.0).abs() > tol {
        return Err(MfgError::NotStochastic(format!("entries sum to {sum}")));
    }
    Ok(())
}

/// Population distribution over states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct MeanField(Vec<f64>);

impl MeanField {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(MfgError::InvalidParameter(
                "mean-field over zero states".into(),
            ));
        }
        check_distribution(&probs, SIMPLEX_TOL)?;
        Ok(Self(probs))
    }

    pub fn uniform(num_states: usize) -> Self {
        Self(vec![1.0 / num_states as f64; num_states])
    }

    pub fn dirac(num_states: usize, state: usize) -> Self {
        let mut p = vec![0.0; num_states];
        p[state] = 1.0;
        Self(p)
    }

    /// Wraps a vector already known to lie on the simplex.
    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn num_states(&self) -> usize {
        self.0.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn validate(&self) -> Result<()> {
        check_distribution(&self.0, SIMPLEX_TOL)
    }

    /// Entrywise difference, as a plain vector.
    pub fn diff(&self, other: &MeanField) -> Vec<f64> {
        self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()
    }
}

impl std::ops::Index<usize> for MeanField {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<MeanField> for Vec<f64> {
    fn from(m: MeanField) -> Self {
        m.0
    }
}

impl TryFrom<Vec<f64>> for MeanField {
    type Error = MfgError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        MeanField::new(v)
    }
}

/// Stationary stochastic policy; row `s` is the action distribution in state `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Table", try_from = "Table")]
pub struct Policy(Table);

impl Policy {
    pub fn new(table: Table) -> Result<Self> {
        if table.rows() == 0 || table.cols() == 0 {
            return Err(MfgError::InvalidParameter("empty policy table".into()));
        }
        table.check_row_stochastic(SIMPLEX_TOL)?;
        Ok(Self(table))
    }

    pub fn uniform(dims: StateActionDims) -> Self {
        Self(Table::filled(
            dims.num_states,
            dims.num_actions,
            1.0 / dims.num_actions as f64,
        ))
    }

    /// Deterministic policy choosing `actions[s]` in state `s`.
    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut t = Table::zeros(actions.len(), num_actions);
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(MfgError::OutOfRange {
                    what: "action",
                    index: a,
                    size: num_actions,
                });
            }
            t[(s, a)] = 1.0;
        }
        Policy::new(t)
    }

    pub(crate) fn from_table_unchecked(table: Table) -> Self {
        Self(table)
    }

    pub fn dims(&self) -> StateActionDims {
        StateActionDims {
            num_states: self.0.rows(),
            num_actions: self.0.cols(),
        }
    }

    pub fn table(&self) -> &Table {
        &self.0
    }

    pub fn into_table(self) -> Table {
        self.0
    }

    pub fn row(&self, s: usize) -> &[f64] {
        self.0.row(s)
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.0[(s, a)]
    }

    pub fn validate(&self) -> Result<()> {
        self.0.check_row_stochastic(SIMPLEX_TOL)
    }

    pub fn min_prob(&self) -> f64 {
        self.0
            .as_slice()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

impl From<Policy> for Table {
    fn from(p: Policy) -> Self {
        p.0
    }
}

impl TryFrom<Table> for Policy {
    type Error = MfgError;

    fn try_from(t: Table) -> Result<Self> {
        Policy::new(t)
    }
}

/// State-action values of a discounted problem with rewards in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    values: Table,
    rho: f64,
}

impl QTable {
    pub fn zeros(dims: StateActionDims, rho: f64) -> Result<Self> {
        Self::new(Table::zeros(dims.num_states, dims.num_actions), rho)
    }

    pub fn new(values: Table, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(MfgError::InvalidParameter(format!(
                "discount rho must lie in (0,1), got {rho}"
            )));
        }
        if !values.is_finite() {
            return Err(MfgError::NonFinite("Q-table entry".into()));
        }
        Ok(Self { values, rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Largest value reachable with rewards in `[0, 1]`.
    pub fn upper_bound(&self) -> f64 {
        1.0 / (1.0 - self.rho)
    }

    pub fn dims(&self) -> StateActionDims {
        StateActionDims {
            num_states: self.values.rows(),
            num_actions: self.values.cols(),
        }
    }

    pub fn values(&self) -> &Table {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut Table {
        &mut self.values
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[(s, a)]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        self.values.row(s)
    }

    /// `(argmax, max)` of row `s`, ties going to the lowest action index.
    pub fn max_action(&self, s: usize) -> (usize, f64) {
        let row = self.values.row(s);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = a;
            }
        }
        (best, row[best])
    }

    /// True when every entry is within `[0, 1/(1-rho)]` up to `tol`.
    pub fn within_bounds(&self, tol: f64) -> bool {
        let hi = self.upper_bound() + tol;
        self.values.as_slice().iter().all(|&q| q >= -tol && q <= hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_field_rejects_off_simplex() {
        assert!(MeanField::new(vec![0.5, 0.6]).is_err());
        assert!(MeanField::new(vec![-0.1, 1.1]).is_err());
        assert!(MeanField::new(vec![f64::NAN, 1.0]).is_err());
        assert!(MeanField::new(vec![]).is_err());
        assert!(MeanField::new(vec![0.25, 0.75]).is_ok());
        assert!(MeanField::new(vec![0.5, 0.5 + 5e-10]).is_ok());
    }

    #[test]
    fn policy_rows_must_be_stochastic() {
        let bad = Table::from_rows(vec![vec![0.5, 0.5], vec![0.9, 0.2]]).unwrap();
        assert!(Policy::new(bad).is_err());
        let good = Table::from_rows(vec![vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        assert!(Policy::new(good).is_ok());
    }

    #[test]
    fn dims_must_be_positive() {
        assert!(StateActionDims::new(0, 2).is_err());
        assert!(StateActionDims::new(2, 0).is_err());
        assert!(StateActionDims::new(1, 1).is_ok());
    }

    #[test]
    fn q_max_breaks_ties_low() {
        let q = QTable::new(Table::from_rows(vec![vec![1.0, 2.0, 2.0]]).unwrap(), 0.5).unwrap();
        assert_eq!(q.max_action(0), (1, 2.0));
    }

    #[test]
    fn qtable_rejects_bad_discount() {
        let dims = StateActionDims::new(1, 1).unwrap();
        assert!(QTable::zeros(dims, 1.0).is_err());
        assert!(QTable::zeros(dims, 0.0).is_err());
    }

    #[test]
    fn table_serializes_as_nested_rows() {
        let t = Table::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(json, "[[1.0,2.0],[3.0,4.0]]");
        let back: Table = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
        assert!(serde_json::from_str::<Table>("[[1.0],[2.0,3.0]]").is_err());
    }
}
