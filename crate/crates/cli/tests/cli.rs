use std::path::Path;
use std::process::{Command, Output};

use bsviel_cli::{parse, run_config, RunConfig, RunOptions};

const BROWNIAN: &str = r#"{"horizon": 1.0, "brownian_dim": 1, "drift": 0.0, "gaussian_sigma": 0.0, "jump_law": {"type": "none"}}"#;
const PM_ONE: &str = r#"{"horizon": 1.0, "brownian_dim": 1, "drift": 0.0, "gaussian_sigma": 0.0,
    "jump_law": {"type": "compound_poisson", "rate": 2.0,
                 "jumps": {"type": "atoms", "atoms": [{"size": 1.0, "prob": 0.5}, {"size": -1.0, "prob": 0.5}]}}}"#;

fn config(levy: &str, n_steps: usize, n_paths: usize, extra: &str, experiment: &str) -> String {
    format!(
        r#"{{"levy": {levy}, "grid": {{"n_steps": {n_steps}}},
            "simulation": {{"n_paths": {n_paths}, "seed": 17}}{extra},
            "experiment": {experiment}}}"#
    )
}

fn bsviel(dir: &Path, sub: &str, text: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, text).unwrap();
    Command::new(env!("CARGO_BIN_EXE_bsviel"))
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("runs"))
        .args(extra)
        .output()
        .unwrap()
}

fn opts(dir: &Path) -> RunOptions {
    RunOptions {
        out_root: dir.to_path_buf(),
        threads: 2,
        override_contraction: false,
    }
}

const Z_ABS: &str = r#"{"type": "solve", "psi": {"type": "brownian_terminal"},
    "generator": {"type": "z_abs", "kappa": 1.5}}"#;

#[test]
fn basis_on_two_atoms_has_rank_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse(&config(PM_ONE, 64, 20_000, "", r#"{"type": "basis"}"#)).unwrap();
    let out = run_config(&cfg, &opts(tmp.path())).unwrap();
    assert!(out.all_passed(), "{:?}", out.checks);
    let basis: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.dir.join("basis.json")).unwrap()).unwrap();
    assert_eq!(basis["requested_order"], 3);
    assert_eq!(basis["effective_rank"], 2);
    assert!(out.files.contains(&"covariation.json".to_string()));
}

#[test]
fn solve_writes_mean_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let exp = r#"{"type": "solve", "psi": {"type": "constant", "value": 1.0},
                  "generator": {"type": "linear", "theta": -0.5}, "max_relative_residual": 0.05}"#;
    let out = bsviel(tmp.path(), "solve", &config(BROWNIAN, 32, 1000, "", exp), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS picard_converged"), "{stdout}");
    let run_dir = std::fs::read_dir(tmp.path().join("runs")).unwrap().next().unwrap().unwrap().path();
    let csv = std::fs::read_to_string(run_dir.join("solution.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,mean_y,sd_y,m_residual_abs,m_residual_rel"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert!((first[1] - (-0.5f64).exp()).abs() < 1e-2);
}

#[test]
fn missing_seed_exits_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let text = config(BROWNIAN, 8, 100, "", Z_ABS).replace(r#", "seed": 17"#, "");
    let out = bsviel(tmp.path(), "solve", &text, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("simulation.seed"));
}

#[test]
fn subcommand_mismatch_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bsviel(tmp.path(), "risk", &config(BROWNIAN, 8, 100, "", Z_ABS), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("experiment.type"));
}

#[test]
fn contraction_rejection_and_override() {
    let tmp = tempfile::tempdir().unwrap();
    let text = config(BROWNIAN, 8, 500, "", Z_ABS);
    let out = bsviel(tmp.path(), "solve", &text, &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let out = bsviel(tmp.path(), "solve", &text, &["--override-contraction"]);
    assert!(matches!(out.status.code(), Some(0) | Some(4)), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn non_convergence_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let solver = r#", "solver": {"max_picard_iters": 1, "picard_tol": 1e-12}"#;
    let exp = r#"{"type": "solve", "psi": {"type": "brownian_terminal"}, "generator": {"type": "linear", "theta": -0.5}}"#;
    let out = bsviel(tmp.path(), "solve", &config(BROWNIAN, 8, 500, solver, exp), &[]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn manifest_round_trips_config() {
    let tmp = tempfile::tempdir().unwrap();
    let exp = r#"{"type": "duality", "coefficients": {"b0": 0.3}, "psi": {"type": "constant", "value": 1.0},
                  "phi": {"type": "constant", "value": 1.0}}"#;
    let cfg = parse(&config(BROWNIAN, 16, 200, "", exp)).unwrap();
    let out = run_config(&cfg, &opts(tmp.path())).unwrap();
    assert!(out.all_passed());
    assert!(out.dir.ends_with(format!("duality-{}", cfg.content_hash())));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 17);
    assert_eq!(manifest["threads"], 2);
    assert_eq!(manifest["config_hash"], cfg.content_hash());
    let back: RunConfig = serde_json::from_value(manifest["config"].clone()).unwrap();
    assert_eq!(back, cfg);
    for f in ["duality.json", "forward.csv", "backward.csv"] {
        assert!(out.files.contains(&f.to_string()), "{f}");
    }
}
