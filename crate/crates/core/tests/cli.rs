use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use fadesched::cli::{
    exit_code, EXIT_CONFIG, EXIT_MISMATCH, EXIT_NUMERICAL, EXIT_OK, EXIT_VERIFY_FAILED, SEED_ENV,
};
use fadesched::SchedError;
use serde_json::{json, Value};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fadesched"));
    cmd.env_remove(SEED_ENV);
    cmd
}

fn status(cmd: &mut Command) -> i32 {
    let out = cmd.output().expect("binary runs");
    out.status.code().expect("exited normally")
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn two_atom_config(policies: Value) -> Value {
    json!({
        "model": {"kind": "discrete", "atoms": [[1.0, 0.5], [4.0, 0.5]]},
        "cost": {"n": 2.0},
        "horizon": 3,
        "budget": 1.0,
        "policies": policies,
        "mc": {"episodes": 2000, "seed": 11}
    })
}

fn four_policies() -> Value {
    json!([
        {"kind": "non_causal_primal"},
        {"kind": "causal_primal"},
        {"kind": "equal_bit"},
        {"kind": "deadline_flush"}
    ])
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn thresholds_csv_for_unit_channel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &json!({"model": {"kind": "deterministic", "c": 1.0}}),
    );
    let out = dir.path().join("xi.csv");
    let code = status(
        bin()
            .args(["thresholds", "--config"])
            .arg(&cfg)
            .args(["--n", "2,3", "--horizon", "5", "--out"])
            .arg(&out),
    );
    assert_eq!(code, EXIT_OK);
    let rows = read_rows(&out);
    assert_eq!(rows.len(), 10);
    for row in &rows {
        let n: f64 = row[0].parse().unwrap();
        let t: f64 = row[1].parse().unwrap();
        let value: f64 = row[2].parse().unwrap();
        assert!((value * t.powf(n - 1.0) - 1.0).abs() < 1e-12);
        if t == 1.0 {
            assert!(row[3].is_empty());
        } else {
            assert_eq!(row[3].parse::<f64>().unwrap(), t - 1.0);
        }
    }
    assert!(dir.path().join("xi.csv.manifest.json").exists());
}

#[test]
fn simulate_writes_summary_with_ranking() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &two_atom_config(four_policies()));
    let out = dir.path().join("run");
    let code = status(
        bin()
            .args(["simulate", "--config"])
            .arg(&cfg)
            .arg("--trace")
            .arg("--out")
            .arg(&out),
    );
    assert_eq!(code, EXIT_OK);
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let entries = report["ranking"]["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 4);
    assert_eq!(report["summary"]["episodes"], 2000);
    assert_eq!(read_rows(&out.join("trace.csv")).len(), 8000);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 11);
    assert_eq!(manifest["command"], "simulate");
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &two_atom_config(four_policies()));
    let summaries: Vec<Value> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            assert_eq!(
                status(
                    bin()
                        .args(["simulate", "--config"])
                        .arg(&cfg)
                        .arg("--out")
                        .arg(&out)
                ),
                EXIT_OK
            );
            serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
        })
        .collect();
    assert_eq!(summaries[0], summaries[1]);
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = two_atom_config(json!([{"kind": "equal_bit"}]));
    cfg["mc"] = json!({"episodes": 10});
    let path = write_config(dir.path(), "c.json", &cfg);
    let seed_of = |out: &Path| -> Value {
        let m: Value =
            serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        m["master_seed"].clone()
    };

    let out = dir.path().join("default");
    assert_eq!(
        status(
            bin()
                .args(["simulate", "--config"])
                .arg(&path)
                .arg("--out")
                .arg(&out)
        ),
        EXIT_OK
    );
    assert_eq!(seed_of(&out), 0);

    let out = dir.path().join("env");
    assert_eq!(
        status(
            bin()
                .env(SEED_ENV, "42")
                .args(["simulate", "--config"])
                .arg(&path)
                .arg("--out")
                .arg(&out)
        ),
        EXIT_OK
    );
    assert_eq!(seed_of(&out), 42);

    let out = dir.path().join("flag");
    let code = status(
        bin()
            .env(SEED_ENV, "42")
            .args(["simulate", "--seed", "7", "--config"])
            .arg(&path)
            .arg("--out")
            .arg(&out),
    );
    assert_eq!(code, EXIT_OK);
    assert_eq!(seed_of(&out), 7);
}

#[test]
fn verify_passes_and_fails() {
    assert_eq!(
        status(bin().args(["verify", "--suite", "thresholds"])),
        EXIT_OK
    );
    assert_eq!(
        status(bin().args(["verify", "--suite", "policy", "--tol", "0"])),
        EXIT_VERIFY_FAILED
    );
}

#[test]
fn verify_report_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    assert_eq!(
        status(
            bin()
                .args(["verify", "--suite", "dp", "--dp-grid", "128", "--out"])
                .arg(&out)
        ),
        EXIT_OK
    );
    let report: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let checks = report.as_array().unwrap();
    assert_eq!(checks.len(), 4);
    assert!(checks
        .iter()
        .all(|c| c["suite"] == "dp" && c["passed"] == true));
    assert!(dir.path().join("report.json.manifest.json").exists());
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let missing = dir.path().join("nope.json");
    assert_eq!(
        status(
            bin()
                .args(["simulate", "--config"])
                .arg(&missing)
                .arg("--out")
                .arg(&out)
        ),
        EXIT_CONFIG
    );

    let cfg = write_config(dir.path(), "c.json", &two_atom_config(four_policies()));
    let code = status(
        bin()
            .args(["simulate", "--episodes", "0", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out),
    );
    assert_eq!(code, EXIT_CONFIG);

    let mut bad = two_atom_config(four_policies());
    bad["colour"] = json!("blue");
    let bad = write_config(dir.path(), "bad.json", &bad);
    assert_eq!(
        status(
            bin()
                .args(["simulate", "--config"])
                .arg(&bad)
                .arg("--out")
                .arg(&out)
        ),
        EXIT_CONFIG
    );

    let zero = write_config(
        dir.path(),
        "zero.json",
        &json!({"model": {"kind": "truncated_exponential", "threshold": 0.0, "rate": 1.0}}),
    );
    let code = status(
        bin()
            .args(["thresholds", "--n", "2", "--horizon", "3", "--config"])
            .arg(&zero)
            .arg("--out")
            .arg(&out),
    );
    assert_eq!(code, EXIT_CONFIG);

    assert_eq!(
        status(
            bin()
                .args(["figure", "--which", "histogram", "--out"])
                .arg(&out)
        ),
        EXIT_CONFIG
    );
}

#[test]
fn mismatches_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = write_config(
        dir.path(),
        "c.json",
        &two_atom_config(json!([{"kind": "causal_primal", "n": 3.0}])),
    );
    assert_eq!(
        status(
            bin()
                .args(["simulate", "--config"])
                .arg(&cfg)
                .arg("--out")
                .arg(&out)
        ),
        EXIT_MISMATCH
    );

    // a table one slot too short for the horizon
    let model = write_config(dir.path(), "m.json", &two_atom_config(json!([])));
    let table = dir.path().join("short.csv");
    let code = status(
        bin()
            .args(["thresholds", "--n", "2", "--horizon", "1", "--config"])
            .arg(&model)
            .arg("--out")
            .arg(&table),
    );
    assert_eq!(code, EXIT_OK);
    let cfg = write_config(
        dir.path(),
        "short.json",
        &two_atom_config(json!([{"kind": "causal_primal", "table": table}])),
    );
    assert_eq!(
        status(
            bin()
                .args(["simulate", "--config"])
                .arg(&cfg)
                .arg("--out")
                .arg(&out)
        ),
        EXIT_MISMATCH
    );
}

#[test]
fn numerical_errors_map_to_three() {
    let e = SchedError::QuadratureNotConverged {
        estimate: 1.0,
        error_bound: 1.0,
    };
    assert_eq!(exit_code(&e), EXIT_NUMERICAL);
    assert_eq!(
        exit_code(&SchedError::GridTooCoarse("x".into())),
        EXIT_NUMERICAL
    );
    assert_eq!(
        exit_code(&SchedError::IndexOutOfHorizon { t: 3, horizon: 2 }),
        EXIT_MISMATCH
    );
}

#[test]
fn policy_fractions_for_unit_channel_are_one_over_t() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &json!({"model": {"kind": "deterministic", "c": 1.0}}),
    );
    let out = dir.path().join("p.csv");
    let code = status(
        bin()
            .args([
                "figure",
                "--which",
                "policy-vs-t",
                "--n",
                "2,5",
                "--horizon",
                "6",
                "--episodes",
                "50",
                "--config",
            ])
            .arg(&cfg)
            .arg("--out")
            .arg(&out),
    );
    assert_eq!(code, EXIT_OK);
    let rows = read_rows(&out);
    assert_eq!(rows.len(), 12);
    for row in rows {
        let t: f64 = row[1].parse().unwrap();
        let mean: f64 = row[2].parse().unwrap();
        let se: f64 = row[3].parse().unwrap();
        assert!((mean - 1.0 / t).abs() < 1e-12, "t={t} mean={mean}");
        assert!(se < 1e-12);
    }
}

#[test]
fn figure_xi_has_default_orders() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("xi.csv");
    assert_eq!(
        status(bin().args(["figure", "--which", "xi", "--out"]).arg(&out)),
        EXIT_OK
    );
    let rows = read_rows(&out);
    assert_eq!(rows.len(), 4 * 20);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("xi.csv.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config"]["n"], json!([2.0, 2.67, 5.0, 100.0]));
}

#[test]
fn shipped_configs_run() {
    let dir = tempfile::tempdir().unwrap();
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in fs::read_dir(configs).unwrap() {
        let path = entry.unwrap().path();
        let out = dir.path().join(path.file_stem().unwrap());
        let code = status(
            bin()
                .args(["simulate", "--episodes", "200", "--config"])
                .arg(&path)
                .arg("--out")
                .arg(&out),
        );
        assert_eq!(code, EXIT_OK, "{}", path.display());
        seen += 1;
    }
    assert_eq!(seen, 4);
}
