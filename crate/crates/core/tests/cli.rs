//! End-to-end checks of the `regretlab` binary: exit codes, output files and
//! reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn regretlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regretlab"))
        .args(args)
        .env_remove("REGRETLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Rows of a CSV with a header, as maps from column name to cell.
fn parse_csv(text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers().unwrap().clone();
    reader
        .records()
        .map(|r| {
            header
                .iter()
                .map(String::from)
                .zip(r.unwrap().iter().map(String::from))
                .collect()
        })
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn rho_sweep_optimum_sits_at_inverse_root_snr() {
    let o = regretlab(&[
        "fig2",
        "--snr-db",
        "10",
        "--start",
        "0.25",
        "--stop",
        "0.4",
        "--step",
        "0.005",
        "--no-meta",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = parse_csv(&stdout(&o));
    assert_eq!(rows.len(), 31);
    let best = rows
        .iter()
        .min_by(|p, q| {
            p["rho"]
                .parse::<f64>()
                .unwrap()
                .total_cmp(&q["rho"].parse().unwrap())
        })
        .unwrap();
    assert_eq!(best["a"].parse::<f64>().unwrap(), 0.315);
    assert!(stderr(&o).contains("min rho"));
}

#[test]
fn strict_passes_when_every_check_holds() {
    let o = regretlab(&[
        "tradeoff",
        "--prior",
        "discrete(0.5,-1;0.5,1)",
        "--noise-var",
        "0.25",
        "--strict",
        "--no-meta",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = parse_csv(&stdout(&o));
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r["tradeoff_holds"] == "true"));
}

#[test]
fn strict_fails_on_an_errored_row() {
    let args = [
        "tradeoff",
        "--prior",
        "gaussian(0,1)",
        "--a-grid",
        "1e-8,1",
        "--no-meta",
    ];
    let lax = regretlab(&args);
    assert_eq!(lax.status.code(), Some(0));
    let rows = parse_csv(&stdout(&lax));
    assert!(rows[0]["error"].contains("Fisher"));
    assert_eq!(rows[0]["rho"], "");
    assert_eq!(rows[1]["error"], "");

    let strict = regretlab(&[&args[..], &["--strict"]].concat());
    assert_eq!(strict.status.code(), Some(2));
}

#[test]
fn invalid_config_reports_the_field_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"schema": 1, "kind": "tradeoff", "prior": {"kind": "gaussian", "mean": 0, "var": 1},
            "noise_var": -1, "a_grid": [1.0]}"#,
    );
    for cmd in ["validate", "run"] {
        let o = regretlab(&[cmd, &bad]);
        assert_eq!(o.status.code(), Some(1), "{cmd}");
        assert!(stderr(&o).contains("noise_var"), "{}", stderr(&o));
    }
    let missing = regretlab(&["validate", dir.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let o = regretlab(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("config fields"));
    assert_eq!(regretlab(&["--help"]).status.code(), Some(0));
    assert_eq!(regretlab(&["schema"]).status.code(), Some(0));
    let bad_prior = regretlab(&["tradeoff", "--prior", "gaussian(0,-1)"]);
    assert_eq!(bad_prior.status.code(), Some(1));
}

#[test]
fn thread_count_must_be_positive() {
    let o = Command::new(env!("CARGO_BIN_EXE_regretlab"))
        .arg("schema")
        .env("REGRETLAB_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("REGRETLAB_THREADS"));
}

#[test]
fn output_files_and_metadata_line() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("out.csv");
    let json_path = dir.path().join("out.json");
    let o = regretlab(&[
        "bounds",
        "--prior",
        "mixture(0.5,-1,0.5;0.5,1,0.5)",
        "--a-grid",
        "1.3",
        "--out",
        csv_path.to_str().unwrap(),
        "--json",
        json_path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let csv_text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv_text.starts_with("# regretlab"));
    let rows = parse_csv(&csv_text);
    assert_eq!(rows.len(), 2);
    assert!(rows
        .iter()
        .all(|r| r["lemma1_holds"] == "true"
            && r["pointwise_violations"].parse::<f64>().unwrap() == 0.0));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 2);
}

#[test]
fn config_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "sweep.json",
        r#"{"schema": 1, "id": "sweep", "kind": "regret-sweep",
            "prior": {"kind": "discrete", "atoms": [{"prob": 0.25, "value": -3}, {"prob": 0.75, "value": 1}]},
            "noise_var": 0.5, "a_grid": {"start": 0.5, "stop": 1.5, "step": 0.5}, "seed": 42,
            "a_hat_rules": [{"rule": "fixed-offset", "delta": 0.05},
                            {"rule": "from-estimator", "estimator": {"kind": "moment-matching"}, "n": 200}]}"#,
    );
    let first = regretlab(&["run", &config, "--no-meta"]);
    let second = regretlab(&["run", &config, "--no-meta"]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(parse_csv(&stdout(&first)).len(), 6);
}
