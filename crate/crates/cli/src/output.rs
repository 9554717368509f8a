//! Report files and their loaders.
//!
//! Numbers are written with 17 significant digits so every file parses back
//! to the exact values that produced it. Missing diagnostics are empty cells.

use std::path::Path;

use sandbox_mfg::{
    ContractionEstimate, EpisodeDiagnostics, MeanField, Policy, TracePoint, SCHEMA_VERSION,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const EPISODE_COLUMNS: [&str; 6] = ["k", "e_pi", "e_mu", "eps_P", "eps_Q", "residual_mu"];
pub const TRACE_COLUMNS: [&str; 4] = ["step", "k", "t", "residual_mu"];

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

fn parse_opt(cell: &str, path: &Path) -> Result<Option<f64>, CliError> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse()
        .map(Some)
        .map_err(|_| CliError::Config(format!("{}: bad number {cell:?}", path.display())))
}

fn parse_req<T: std::str::FromStr>(cell: &str, path: &Path) -> Result<T, CliError> {
    cell.parse()
        .map_err(|_| CliError::Config(format!("{}: bad value {cell:?}", path.display())))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_episodes_csv(path: &Path, rows: &[EpisodeDiagnostics]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(EPISODE_COLUMNS).map_err(csv_err(path))?;
    for d in rows {
        w.write_record([
            d.k.to_string(),
            fmt_opt(d.e_pi),
            fmt_opt(d.e_mu),
            fmt(d.eps_p),
            fmt_opt(d.eps_q),
            fmt(d.residual_mu),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_episodes_csv(path: &Path) -> Result<Vec<EpisodeDiagnostics>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(EPISODE_COLUMNS) {
        return Err(CliError::Config(format!(
            "{}: unexpected header {header:?}",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        out.push(EpisodeDiagnostics {
            k: parse_req(&rec[0], path)?,
            e_pi: parse_opt(&rec[1], path)?,
            e_mu: parse_opt(&rec[2], path)?,
            eps_p: parse_req(&rec[3], path)?,
            eps_q: parse_opt(&rec[4], path)?,
            residual_mu: parse_req(&rec[5], path)?,
        });
    }
    Ok(out)
}

pub fn write_trace_csv(path: &Path, rows: &[TracePoint]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(TRACE_COLUMNS).map_err(csv_err(path))?;
    for p in rows {
        w.write_record([
            p.step.to_string(),
            p.k.to_string(),
            p.t.to_string(),
            fmt(p.residual_mu),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TracePoint>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        out.push(TracePoint {
            step: parse_req(&rec[0], path)?,
            k: parse_req(&rec[1], path)?,
            t: parse_req(&rec[2], path)?,
            residual_mu: parse_req(&rec[3], path)?,
        });
    }
    Ok(out)
}

/// Final learner output for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSummary {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(rename = "K")]
    pub episodes: usize,
    #[serde(rename = "T")]
    pub steps: usize,
    pub transitions: u64,
    pub avg_mean_field: MeanField,
    pub avg_policy: Policy,
    pub min_action_prob: f64,
    /// L1 distance of `avg_mean_field` to the oracle equilibrium, when solved.
    pub mean_field_l1: Option<f64>,
    /// TV distance of `avg_policy` to the oracle equilibrium, when solved.
    pub policy_tv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedDistance {
    pub seed: u64,
    pub mean_field_l1: f64,
    pub policy_tv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aggregate {
    pub schema_version: u32,
    pub seeds: Vec<SeedDistance>,
    pub median_mean_field_l1: f64,
    pub median_policy_tv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeReport {
    pub schema_version: u32,
    pub lambda: f64,
    pub rho: f64,
    pub seed: u64,
    pub estimate: ContractionEstimate,
    pub contraction_verified: bool,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl Aggregate {
    pub fn new(seeds: Vec<SeedDistance>) -> Self {
        let mu: Vec<f64> = seeds.iter().map(|s| s.mean_field_l1).collect();
        let pi: Vec<f64> = seeds.iter().map(|s| s.policy_tv).collect();
        Self {
            schema_version: SCHEMA_VERSION,
            median_mean_field_l1: median(&mu),
            median_policy_tv: median(&pi),
            seeds,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Model(e.into()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
