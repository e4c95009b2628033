//! End-to-end tests of the installed binary: spawn it like a user
//! would and check stdout, artifacts, and exit codes.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chaoskit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary spawns")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is utf-8")
}

fn report_of(out: &Output) -> Value {
    serde_json::from_str(&stdout_of(out)).expect("stdout is a JSON report")
}

fn tmp_path(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("chaoskit-cli-test-{}-{name}", std::process::id()));
    p
}

fn trend_sequence_json(dims: &[usize]) -> String {
    let kernels: Vec<String> = dims
        .iter()
        .map(|&d| {
            let entries: Vec<String> = (0..d)
                .map(|k| format!("[[{k},{k}],{},0.0]", 1.0 / (d as f64).sqrt()))
                .collect();
            format!(
                "{{\"d\":{d},\"m\":1,\"n\":1,\"entries\":[{}]}}",
                entries.join(",")
            )
        })
        .collect();
    format!("[{}]", kernels.join(","))
}

#[test]
fn hermite_prints_canonical_polynomial() {
    let out = run(&["hermite", "--m", "1", "--n", "1"]);
    assert!(out.status.success());
    assert_eq!(stdout_of(&out), "z*zbar - rho\n");
}

#[test]
fn hermite_evaluates_and_reports_json() {
    // J_{1,1}(z, rho) = |z|^2 - rho vanishes at z = 1+i, rho = 2.
    let out = run(&[
        "hermite", "--m", "1", "--n", "1", "--z", "1,1", "--rho", "2", "--json",
    ]);
    assert!(out.status.success());
    let doc = report_of(&out);
    assert_eq!(doc["command"], "hermite");
    assert_eq!(doc["polynomial"], "z*zbar - rho");
    assert_eq!(doc["value"]["re"].as_f64().unwrap(), 0.0);
    assert_eq!(doc["value"]["im"].as_f64().unwrap(), 0.0);
}

#[test]
fn verify_product_suite_passes() {
    let out = run(&["verify", "--suite", "product", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = report_of(&out);
    assert_eq!(doc["command"], "verify");
    assert_eq!(doc["cases"].as_u64().unwrap(), 24);
    assert!(doc["failures"].as_array().unwrap().is_empty());
    assert!(doc["max_error"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn verify_unknown_suite_is_usage_error() {
    let out = run(&["verify", "--suite", "nosuch", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr).to_string();
    assert!(err.contains("unknown suite"), "stderr: {err}");
}

#[test]
fn verify_without_seed_is_usage_error() {
    let out = run(&["verify", "--suite", "product"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr).to_string();
    assert!(err.contains("--seed"), "stderr: {err}");
}

#[test]
fn verify_reports_are_identical_for_any_worker_count() {
    let strip_wall_time = |out: &Output| -> String {
        stdout_of(out)
            .lines()
            .filter(|l| !l.contains("wall_time"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let one = run(&["verify", "--suite", "wick", "--seed", "11", "--workers", "1"]);
    let four = run(&["verify", "--suite", "wick", "--seed", "11", "--workers", "4"]);
    assert!(one.status.success() && four.status.success());
    assert_eq!(strip_wall_time(&one), strip_wall_time(&four));
}

#[test]
fn config_file_fills_missing_options_and_flags_win() {
    let cfg = tmp_path("precedence.cfg");
    std::fs::write(&cfg, "suite=product\nseed=9\ntol=1e-9\n").unwrap();
    let cfg_s = cfg.to_str().unwrap();

    // Everything from the file.
    let out = run(&["verify", "--config", cfg_s]);
    assert_eq!(out.status.code(), Some(0));
    let doc = report_of(&out);
    assert_eq!(doc["config"]["suite"], "product");
    assert_eq!(doc["config"]["seed"].as_u64().unwrap(), 9);
    assert_eq!(doc["config"]["tol"].as_f64().unwrap(), 1e-9);

    // A flag overrides the file entry; unset keys still come from it.
    let out = run(&["verify", "--config", cfg_s, "--suite", "stroock"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = report_of(&out);
    assert_eq!(doc["config"]["suite"], "stroock");
    assert_eq!(doc["config"]["seed"].as_u64().unwrap(), 9);

    std::fs::remove_file(&cfg).ok();
}

#[test]
fn fmt_emits_csv_rows_and_json_summary() {
    let seq = tmp_path("sequence.json");
    std::fs::write(&seq, trend_sequence_json(&[1, 2, 4])).unwrap();
    let csv = tmp_path("fmt.csv");
    let out = run(&[
        "fmt",
        "--sequence",
        seq.to_str().unwrap(),
        "--samples",
        "500",
        "--seed",
        "3",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = report_of(&out);
    assert_eq!(doc["cases"].as_u64().unwrap(), 3);
    let rows = doc["report"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    // Exact values for the diagonal trend family.
    assert_eq!(rows[0]["gap"].as_f64().unwrap(), 6.0);
    assert!((rows[1]["gap"].as_f64().unwrap() - 3.0).abs() <= 1e-12);

    let table = std::fs::read_to_string(&csv).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k,dim,second_moment,gap,unsym_sum,sym_sum,max_contraction,\
         var_grad,var_grad_bar,var_mixed,normality_distance"
    );
    assert_eq!(lines.count(), 3);

    std::fs::remove_file(&seq).ok();
    std::fs::remove_file(&csv).ok();
}

#[test]
fn ou_emits_replica_csv_and_summary() {
    let csv = tmp_path("ou.csv");
    let out = run(&[
        "ou", "--lambda", "1", "--omega", "0.5", "--T", "10", "--steps", "1000",
        "--replicas", "8", "--seed", "5", "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = report_of(&out);
    assert_eq!(doc["cases"].as_u64().unwrap(), 8);
    for key in [
        "mean_gamma_hat_re",
        "mean_gamma_hat_im",
        "se_re",
        "se_im",
        "bias_abs",
        "normality_distance",
    ] {
        assert!(doc["summary"][key].is_f64(), "summary key {key} missing");
    }

    let table = std::fs::read_to_string(&csv).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "replica,gamma_hat_re,gamma_hat_im,sqrtT_error_re,sqrtT_error_im"
    );
    assert_eq!(lines.count(), 8);
    std::fs::remove_file(&csv).ok();
}

#[test]
fn ou_rejects_invalid_model_parameters() {
    let out = run(&[
        "ou", "--lambda", "-1", "--T", "10", "--steps", "100", "--seed", "5",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_path_is_reported() {
    let out = run(&[
        "verify",
        "--suite",
        "product",
        "--seed",
        "7",
        "--out",
        "/nonexistent-dir/report.json",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr).to_string();
    assert!(err.contains("cannot write output"), "stderr: {err}");
}

#[test]
fn verify_out_writes_the_same_report() {
    let path = tmp_path("verify.json");
    let out = run(&[
        "verify", "--suite", "humeyer", "--seed", "7",
        "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let file_doc: Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let stdout_doc = report_of(&out);
    assert_eq!(file_doc, stdout_doc);
    std::fs::remove_file(&path).ok();
}
