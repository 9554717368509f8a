use std::path::Path;
use std::process::Command;

use sandbox_mfg::{Checkpoint, EquilibriumDocument, MfgEnvironment};
use sandbox_mfg_cli::output::{
    read_episodes_csv, read_json, read_trace_csv, Aggregate, ProbeReport, SeedSummary,
};
use sandbox_mfg_cli::{load_config, ExperimentConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sandbox-mfg-cli"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"{
    "mode": "compare",
    "environment": {"kind": "congestion", "side": 3, "favorable_states": [[2,2],[2,3],[3,2],[3,3]]},
    "K": 6, "T": 1500, "num_seeds": 2, "trace_every": 500, "diagnostics_every": 2
}"#;

#[test]
fn compare_writes_every_report_and_they_reload() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), SMALL);
    let status = bin()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--output-dir",
            out.to_str().unwrap(),
            "--seed",
            "7",
            "--quiet",
        ])
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    assert!(status.stderr.is_empty());

    let eq: EquilibriumDocument = read_json(&out.join("oracle.json")).unwrap();
    assert!(eq.converged);
    let agg: Aggregate = read_json(&out.join("aggregate.json")).unwrap();
    assert_eq!(
        agg.seeds.iter().map(|s| s.seed).collect::<Vec<_>>(),
        vec![7, 8]
    );
    for seed in [7, 8] {
        let rows = read_episodes_csv(&out.join(format!("episodes_seed{seed}.csv"))).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows[0].e_mu.is_some() && rows[1].e_mu.is_none());
        let summary: SeedSummary =
            read_json(&out.join(format!("summary_seed{seed}.json"))).unwrap();
        assert_eq!(summary.transitions, 9000);
        assert_eq!(summary.seed, seed);
        let trace = read_trace_csv(&out.join(format!("trace_seed{seed}.csv"))).unwrap();
        assert_eq!(trace.len(), 18);
        let text =
            std::fs::read_to_string(out.join(format!("checkpoint_seed{seed}.json"))).unwrap();
        let cp = Checkpoint::from_json(&text).unwrap();
        assert_eq!((cp.k, cp.t), (6, 1500));
    }
}

#[test]
fn repeated_invocations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("run{run}"));
        let status = bin()
            .args([
                "--config",
                cfg.to_str().unwrap(),
                "--output-dir",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
        let mut files: Vec<_> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn mode_override_and_probe() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("probe");
    let status = bin()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--output-dir",
            out.to_str().unwrap(),
            "--mode",
            "probe",
            "--quiet",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let report: ProbeReport = read_json(&out.join("probe.json")).unwrap();
    assert_eq!(report.contraction_verified, report.estimate.d_hat < 1.0);
    assert!(!out.join("oracle.json").exists());
}

#[test]
fn exit_codes_follow_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), r#"{"theta": 0.7, "gamma": 0.6}"#);
    let out = bin()
        .args(["--config", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("theta must be < gamma"), "{msg}");

    let missing = bin()
        .args(["--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(3));

    let bad_mode = bin()
        .args(["--config", bad.to_str().unwrap(), "--mode", "train"])
        .output()
        .unwrap();
    assert!(!bad_mode.status.success());

    // An output directory that is actually a file.
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "").unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let io = bin()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--output-dir",
            blocker.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(io.status.code(), Some(3));
}

#[test]
fn unconverged_oracle_exits_with_numerical_code() {
    // One damped iteration cannot reach a 1e-15 residual.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"mode": "oracle", "environment": {"kind": "congestion", "side": 3,
            "favorable_states": [[2,2]]}, "oracle_max_iter": 1, "oracle_tol": 1e-15}"#,
    );
    let out = bin()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--output-dir",
            dir.path().join("o").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn loaded_config_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), SMALL);
    let cfg = load_config(&path).unwrap();
    let again = write_config(dir.path(), &cfg.to_json());
    assert_eq!(load_config(&again).unwrap(), cfg);
    assert_eq!(cfg.environment.build().unwrap().dims().num_states, 9);
    assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
}

#[test]
fn projected_run_keeps_first_steps_on_the_net() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"environment": {"kind": "congestion", "side": 2, "favorable_states": [[2,2]]},
            "use_projection": true, "epsilon_net_mesh": 0.5, "K": 4, "T": 300}"#,
    );
    let out = dir.path().join("p");
    let status = bin()
        .args(["--config", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap(), "--quiet"])
        .status()
        .unwrap();
    assert!(status.success());
    let summary: SeedSummary = read_json(&out.join("summary_seed0.json")).unwrap();
    // The average of three net points on a grid of step 1/8 has step 1/24.
    for &p in summary.avg_mean_field.probs() {
        assert!((p * 24.0 - (p * 24.0).round()).abs() < 1e-9, "{p}");
    }
}
