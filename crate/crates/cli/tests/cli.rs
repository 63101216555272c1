use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde_json::Value;

static COUNTER: AtomicUsize = AtomicUsize::new(0);

fn scratch_dir() -> PathBuf {
    let id = COUNTER.fetch_add(1, Ordering::SeqCst);
    let dir = std::env::temp_dir().join(format!("finsler-cli-{}-{id}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn finsler(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finsler")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const EUCLIDEAN: &str = r#"
seed = 1
suites = ["xkj", "chern", "cartan", "identities"]
[lagrangian]
builtin = "euclidean"
dimension = 2
[samples]
count = 8
"#;

const RANDERS_BERWALD: &str = r#"
seed = 5
suites = ["chern"]
[lagrangian]
builtin = "randers_rotational"
dimension = 2
beta = 0.3
[samples]
count = 10
[[connections]]
kind = "berwald"
"#;

#[test]
fn euclidean_check_passes() {
    let dir = scratch_dir();
    let cfg = write_config(&dir, "e.toml", EUCLIDEAN);
    let out = finsler(&["check", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("result: PASS"));
}

#[test]
fn berwald_fails_chern_suite_on_randers() {
    let dir = scratch_dir();
    let cfg = write_config(&dir, "r.toml", RANDERS_BERWALD);
    let out = finsler(&["--json", "-", "check", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let report = json_stdout(&out);
    let failures: Vec<&str> = report["summary"]["failures"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(failures.contains(&"berwald/chern/delta"), "{failures:?}");
}

#[test]
fn config_errors_exit_two() {
    let dir = scratch_dir();
    let bad_suite = write_config(
        &dir,
        "s.toml",
        "suites = [\"nope\"]\n[lagrangian]\nbuiltin = \"euclidean\"\ndimension = 2\n",
    );
    let out = finsler(&["check", bad_suite.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let bad_expr = write_config(
        &dir,
        "x.toml",
        "[lagrangian]\ndimension = 2\nexpression = \"0.5*(y1^2 + \"\n",
    );
    assert_eq!(code(&finsler(&["check", bad_expr.to_str().unwrap()])), 2);

    let unknown_key = write_config(
        &dir,
        "k.toml",
        "colour = 1\n[lagrangian]\nbuiltin = \"euclidean\"\ndimension = 2\n",
    );
    assert_eq!(code(&finsler(&["check", unknown_key.to_str().unwrap()])), 2);

    assert_eq!(
        code(&finsler(&["check", dir.join("missing.toml").to_str().unwrap()])),
        2
    );
}

#[test]
fn degenerate_lagrangian_exits_three() {
    let dir = scratch_dir();
    let cfg = write_config(
        &dir,
        "d.toml",
        "suites = [\"xkj\"]\n[lagrangian]\ndimension = 2\nexpression = \"0.5*y1^2\"\n[samples]\ncount = 5\n",
    );
    let out = finsler(&["--json", "-", "check", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert_eq!(json_stdout(&out)["summary"]["degenerate"], Value::Bool(true));
}

#[test]
fn guard_rejecting_most_points_exits_three() {
    let dir = scratch_dir();
    let cfg = write_config(
        &dir,
        "g.toml",
        "suites = [\"xkj\"]\n[lagrangian]\nbuiltin = \"euclidean\"\ndimension = 2\nguard = \"x1 - 0.8\"\n[samples]\ncount = 10\n",
    );
    assert_eq!(code(&finsler(&["check", cfg.to_str().unwrap()])), 3);
}

#[test]
fn json_is_byte_identical_across_runs() {
    let dir = scratch_dir();
    let cfg = write_config(&dir, "r.toml", RANDERS_BERWALD);
    let a = dir.join("a.json");
    let b = dir.join("b.json");
    finsler(&["--json", a.to_str().unwrap(), "check", cfg.to_str().unwrap()]);
    finsler(&["--json", b.to_str().unwrap(), "check", cfg.to_str().unwrap()]);
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);

    let c = finsler(&["--seed", "6", "--json", "-", "check", cfg.to_str().unwrap()]);
    assert_ne!(c.stdout, a);
}

#[test]
fn config_dir_env_resolves_relative_paths() {
    let dir = scratch_dir();
    write_config(&dir, "env.toml", EUCLIDEAN);
    let out = Command::new(env!("CARGO_BIN_EXE_finsler"))
        .args(["check", "env.toml"])
        .env("FINSLER_CONFIG_DIR", &dir)
        .current_dir(std::env::temp_dir())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn output_key_writes_report() {
    let dir = scratch_dir();
    let target = dir.join("out.json");
    let text = format!("output = {:?}\n{EUCLIDEAN}", target.to_str().unwrap());
    let cfg = write_config(&dir, "o.toml", &text);
    assert_eq!(code(&finsler(&["check", cfg.to_str().unwrap()])), 0);
    let report: Value = serde_json::from_slice(&std::fs::read(target).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert!(report.get("wall_clock_ms").is_none());
}

#[test]
fn timing_flag_adds_wall_clock() {
    let dir = scratch_dir();
    let cfg = write_config(&dir, "e.toml", EUCLIDEAN);
    let out = finsler(&["--timing", "--json", "-", "check", cfg.to_str().unwrap()]);
    assert!(json_stdout(&out)["wall_clock_ms"].is_u64());
}

#[test]
fn tensors_report_euclidean_and_riemannian_values() {
    let dir = scratch_dir();
    let e = write_config(&dir, "e.toml", EUCLIDEAN);
    let out = finsler(&[
        "--json",
        "-",
        "tensors",
        e.to_str().unwrap(),
        "--x",
        "0.1,-0.4",
        "--y",
        "1,2",
    ]);
    assert_eq!(code(&out), 0);
    let t = &json_stdout(&out)["tensors"];
    let g: Vec<f64> = t["metric"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(g, vec![1.0, 0.0, 0.0, 1.0]);

    // g = diag(1, x1^2): Gamma^1_22 = -x1.
    let r = write_config(
        &dir,
        "r.toml",
        "[lagrangian]\nbuiltin = \"riemannian\"\na = [[\"1\", \"0\"], [\"0\", \"x1^2\"]]\n",
    );
    let out = finsler(&[
        "--json",
        "-",
        "tensors",
        r.to_str().unwrap(),
        "--x",
        "2,0.5",
        "--y",
        "0.3,-1",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let t = &json_stdout(&out)["tensors"];
    let gamma = t["formal_christoffel"]["data"].as_array().unwrap();
    // Row-major [a][b][c] with n = 2: index of (0, 1, 1) is 3.
    assert!((gamma[3].as_f64().unwrap() + 2.0).abs() < 1e-10);
    let flags = t["flags"].as_object().unwrap();
    assert!(flags.values().all(|v| v == &Value::Bool(true)));
}

#[test]
fn tensors_rejects_wrong_point_dimension() {
    let dir = scratch_dir();
    let e = write_config(&dir, "e.toml", EUCLIDEAN);
    assert_eq!(
        code(&finsler(&["tensors", e.to_str().unwrap(), "--x", "0.1", "--y", "1,2"])),
        2
    );
}

#[test]
fn compare_reports_matrix_and_canonical_agreement() {
    let dir = scratch_dir();
    let cfg = write_config(
        &dir,
        "c.toml",
        "seed = 2\nsuites = [\"chern\", \"cartan\"]\n[lagrangian]\nbuiltin = \"randers_rotational\"\ndimension = 2\nbeta = 0.3\n[samples]\ncount = 8\n",
    );
    let out = finsler(&["--json", "-", "compare", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let report = json_stdout(&out);
    let rows = report["matrix"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    let pass = |conn: &str, col: usize| {
        rows.iter().find(|r| r["connection"] == conn).unwrap()["cells"][col]["pass"] == Value::Bool(true)
    };
    assert!(pass("chern", 0) && !pass("chern", 1));
    assert!(!pass("cartan", 0) && pass("cartan", 1));
    assert!(!pass("berwald", 0) && !pass("hashiguchi", 1));
    for c in report["canonical"].as_array().unwrap() {
        assert_eq!(c["agrees"], Value::Bool(true));
    }
}
