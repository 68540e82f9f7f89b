use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use rulab::config::ConfigTree;
use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn rulab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rulab"))
        .args(args)
        .env_remove("RULAB_THREADS")
        .output()
        .expect("spawn rulab")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn cfg(name: &str) -> String {
    configs().join(name).display().to_string()
}

const FAST: [&str; 6] = [
    "--set",
    "estimation.n=40",
    "--set",
    "estimation.m=40",
    "--set",
    "estimation.J=5",
];

#[test]
fn lambda_reports_estimate_fields() {
    let mut args = vec!["lambda", "--config"];
    let path = cfg("by_table1.toml");
    args.push(&path);
    args.extend(FAST);
    let v = json(&rulab(&args));
    for key in [
        "lambda_p",
        "rho_hat",
        "std_error",
        "lambda_std_error",
        "J",
        "seed",
        "stability",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["n"], 40);
}

#[test]
fn spectral_matches_two_state_characteristic_polynomial() {
    let v = json(&rulab(&["spectral", "--config", &cfg("finite2.toml")]));
    // k_ij = P_ij exp((1 - gamma) g_ij), gamma = 2.
    let k = |p: f64, g: f64| p * (-g).exp();
    let (a, b, c, d) = (k(0.9, 0.02), k(0.1, 0.0), k(0.3, -0.01), k(0.7, -0.03));
    let tr = a + d;
    let det = a * d - b * c;
    let rho = 0.5 * (tr + (tr * tr - 4.0 * det).sqrt());
    assert!((v["rho"].as_f64().unwrap() - rho).abs() < 1e-10);
}

#[test]
fn solve_singleton_matches_closed_form() {
    let v = json(&rulab(&["solve", "--config", &cfg("singleton_stable.toml")]));
    assert_eq!(v["status"], "converged");
    let g = v["solution"][0].as_f64().unwrap();
    let exact = (0.04 / (1.0 - 0.96 * 0.9f64.sqrt())).powi(2);
    assert!((g - exact).abs() < 1e-9, "{g} vs {exact}");
    assert!(v.get("caveat").is_none());
}

#[test]
fn framing_config_converges_while_a_collapses() {
    let path = cfg("singleton_framing.toml");
    let b = json(&rulab(&["solve", "--config", &path]));
    assert_eq!(b["status"], "converged");
    let a = json(&rulab(&["solve", "--config", &path, "--set", "solve.operator=\"a\""]));
    assert_eq!(a["status"], "collapsed_to_zero");
    assert!(a["solution"].is_null());
}

#[test]
fn continuous_solve_carries_truncation_caveat() {
    let out = rulab(&[
        "solve",
        "--config",
        &cfg("by_table1.toml"),
        "--set",
        "model={ name = \"by_constant_vol\", mu_c = 0.0015, rho = 0.979, sigma = 0.0078 }",
        "--set",
        "grid.nodes=41",
    ]);
    let v = json(&out);
    assert!(v["caveat"].as_str().unwrap().contains("truncated"));
}

#[test]
fn unit_gamma_fails_fast_with_exit_one() {
    let text = std::fs::read_to_string(configs().join("by_table1.toml")).unwrap();
    let bad = text.replace("gamma = 10.0", "gamma = 1.0");
    let start = Instant::now();
    let err = ConfigTree::parse(&bad).and_then(|t| t.validated());
    let elapsed = start.elapsed();
    assert!(err.is_err());
    assert!(elapsed.as_millis() < 10, "validation took {elapsed:?}");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, bad).unwrap();
    let out = rulab(&["lambda", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("gamma") && msg.contains("line"), "{msg}");
}

#[test]
fn unknown_key_and_missing_file_exit_one() {
    let out = rulab(&[
        "lambda",
        "--config",
        &cfg("finite2.toml"),
        "--set",
        "estimation.bogus=1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
    let out = rulab(&["lambda", "--config", "/nonexistent/x.toml"]);
    assert_eq!(out.status.code(), Some(1));
    let out = rulab(&["lambda", "--config", &cfg("finite2.toml"), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn spectral_no_convergence_exits_two() {
    let out = rulab(&["spectral", "--config", &cfg("finite2.toml"), "--set", "grid.max_iter=2"]);
    assert_eq!(out.status.code(), Some(2));
}

fn sweep_args<'a>(path: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec!["sweep", "--config", path];
    args.extend(FAST);
    args.extend(extra);
    args
}

#[test]
fn sweep_output_is_deterministic_across_runs_and_threads() {
    let path = cfg("sweep_psi_mu.toml");
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<PathBuf> = (0..3).map(|i| dir.path().join(format!("s{i}.csv"))).collect();
    let small = ["--set", "sweep.a.steps=2", "--set", "sweep.b.steps=2"];
    for (i, threads) in ["1", "1", "3"].iter().enumerate() {
        let out_path = files[i].to_str().unwrap().to_string();
        let mut args = sweep_args(&path, &small);
        args.extend(["--out", &out_path, "--threads", threads]);
        let out = rulab(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let bytes: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(f).unwrap()).collect();
    assert_eq!(bytes[0], bytes[1]);
    assert_eq!(bytes[0], bytes[2]);
    let text = String::from_utf8(bytes[0].clone()).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert_eq!(
        text.lines().next().unwrap(),
        "param_a,param_b,lambda_p,rho_hat,std_error,status"
    );
}

#[test]
fn empty_sweep_writes_header_only() {
    let path = cfg("sweep_psi_mu.toml");
    let out = rulab(&sweep_args(&path, &["--set", "sweep.a.steps=0"]));
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "param_a,param_b,lambda_p,rho_hat,std_error,status\n"
    );
}

#[test]
fn one_by_one_sweep_equals_lambda_run() {
    let path = cfg("sweep_psi_mu.toml");
    let out = rulab(&sweep_args(
        &path,
        &[
            "--set",
            "sweep.a.steps=1",
            "--set",
            "sweep.b.steps=1",
            "--set",
            "sweep.b.lo=0.0015",
            "--format",
            "json",
        ],
    ));
    let cells = json(&out);
    let mut args = vec!["lambda", "--config", &path, "--set", "preferences.psi=1.1"];
    args.extend(FAST);
    let single = json(&rulab(&args));
    assert_eq!(cells[0]["lambda_p"], single["lambda_p"]);
    assert_eq!(cells[0]["rho_hat"], single["rho_hat"]);
}

#[test]
fn failing_cell_does_not_disturb_others() {
    let path = cfg("sweep_psi_mu.toml");
    let good = json(&rulab(&sweep_args(
        &path,
        &[
            "--set",
            "sweep.a={ name = \"rho\", lo = 0.9, hi = 0.95, steps = 2 }",
            "--set",
            "sweep.b.steps=2",
            "--format",
            "json",
        ],
    )));
    let mixed = json(&rulab(&sweep_args(
        &path,
        &[
            "--set",
            "sweep.a={ name = \"rho\", lo = 0.9, hi = 1.5, steps = 2 }",
            "--set",
            "sweep.b.steps=2",
            "--format",
            "json",
        ],
    )));
    assert_eq!(good[0], mixed[0]);
    assert_eq!(good[1], mixed[1]);
    assert_eq!(mixed[2]["status"], "error:domain");
    assert_eq!(mixed[3]["status"], "error:domain");
}

#[test]
fn beta_sweep_with_common_numbers_is_linear() {
    let path = cfg("sweep_psi_mu.toml");
    let cells = json(&rulab(&sweep_args(
        &path,
        &[
            "--set",
            "sweep.a={ name = \"beta\", lo = 0.5, hi = 0.999, steps = 4 }",
            "--set",
            "sweep.b.steps=1",
            "--set",
            "sweep.common_random_numbers=true",
            "--format",
            "json",
        ],
    )));
    let ratios: Vec<f64> = cells
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["lambda_p"].as_f64().unwrap() / c["param_a"].as_f64().unwrap())
        .collect();
    for r in &ratios {
        assert!((r / ratios[0] - 1.0).abs() < 1e-14, "{ratios:?}");
    }
}

#[test]
fn simulate_emits_paths() {
    let v = json(&rulab(&[
        "simulate",
        "--config",
        &cfg("by_table1.toml"),
        "--steps",
        "12",
        "--paths",
        "3",
        "--x0",
        "0.0,6e-5",
    ]));
    let paths = v.as_array().unwrap();
    assert_eq!(paths.len(), 3);
    assert_eq!(paths[0]["x_final"].as_array().unwrap().len(), 2);
    let out = rulab(&["simulate", "--config", &cfg("by_table1.toml"), "--x0", "0.0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn lambda_json_round_trips_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("l.json");
    let path = cfg("by_table1.toml");
    let mut args = vec!["lambda", "--config", &path, "--out", out_path.to_str().unwrap()];
    args.extend(FAST);
    let out = rulab(&args);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&out_path).unwrap();
    let est: rulab::LambdaEstimate = serde_json::from_str(&text).unwrap();
    let again = serde_json::to_string(&est).unwrap();
    assert_eq!(serde_json::from_str::<rulab::LambdaEstimate>(&again).unwrap(), est);
}
