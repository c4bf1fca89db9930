use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use toral_lab::harmonic::GridField;

const CAT: &str = "[[2,1],[1,1]]";
// h0 = 0.05·sin(2πx₁)·e₂
const MANUFACTURED: &str =
    r#"{"L":[[2,1],[1,1]],"H0":[{"n":[1,0],"re":[0,0],"im":[0,-0.025]},{"n":[-1,0],"re":[0,0],"im":[0,0.025]}]}"#;

fn toral(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_toral-lab"));
    c.args(args).env_remove("TORAL_LAB_THREADS");
    for (k, v) in envs {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn stderr_json(o: &Output) -> Value {
    assert!(!o.status.success());
    serde_json::from_slice(&o.stderr).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn classify_cat_map() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "cat.json", CAT);
    let r = stdout_json(&toral(&["classify", "--matrix", &m], &[]));
    assert_eq!(r["result"]["very_weakly_irreducible"], true);
    assert_eq!(r["result"]["hyperbolic"], true);
    assert_eq!(r["config"]["command"]["name"], "classify");
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn solve_manufactured_and_rerun_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let map = write(dir.path(), "map.json", MANUFACTURED);
    let a = dir.path().join("a");
    let r = stdout_json(&toral(
        &["--out", a.to_str().unwrap(), "--threads", "2", "solve", "--map", &map, "--grid", "32", "--components", "us"],
        &[],
    ));
    let res = &r["result"];
    assert!(res["residual_sup"].as_f64().unwrap() <= 1e-8, "{res}");
    assert!(res["manufactured"]["recovery_error_sup"].as_f64().unwrap() <= 1e-6);
    assert_eq!(res["regularity"]["preferred"], "exponential");
    let h = GridField::from_bytes(&fs::read(a.join("h.bin")).unwrap()).unwrap();
    assert_eq!((h.d, h.n, h.components), (2, 32, 2));
    assert!(a.join("h_u.bin").is_file() && a.join("h_s.bin").is_file() && a.join("regularity.csv").is_file());

    let b = dir.path().join("b");
    let cfg = a.join("config.json");
    let again = stdout_json(&toral(&["--out", b.to_str().unwrap(), "run", "--config", cfg.to_str().unwrap()], &[]));
    assert_eq!(again["result"], r["result"]);
    for f in ["h.bin", "h_u.bin", "h_s.bin", "regularity.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn analyze_regularity_reads_solver_output() {
    let dir = tempfile::tempdir().unwrap();
    let map = write(dir.path(), "map.json", MANUFACTURED);
    let a = dir.path().join("a");
    stdout_json(&toral(&["--out", a.to_str().unwrap(), "solve", "--map", &map, "--grid", "32", "--components", "us"], &[]));
    let field = a.join("h.bin");
    let r = stdout_json(&toral(
        &["analyze-regularity", "--field", field.to_str().unwrap(), "--noise-floor", "1e-10", "--max-order", "3"],
        &[],
    ));
    assert_eq!(r["result"]["l2_verdict"], "consistent-with-l2");
    assert_eq!(r["result"]["l2_checks"].as_array().unwrap().len(), 1 + 2 + 3 + 4);
}

#[test]
fn empty_and_malformed_json_are_config_invalid() {
    let dir = tempfile::tempdir().unwrap();
    for text in ["", "[[2,1],[1,", "{\"L\": 3}"] {
        let m = write(dir.path(), "bad.json", text);
        let o = toral(&["classify", "--matrix", &m], &[]);
        assert_eq!(o.status.code(), Some(2));
        assert_eq!(stderr_json(&o)["error"]["kind"], "ConfigInvalid");
    }
    let c = write(dir.path(), "run.json", "{\"command\": {\"name\": \"classify\"}}");
    let o = toral(&["run", "--config", &c], &[]);
    assert_eq!(stderr_json(&o)["error"]["kind"], "ConfigInvalid");
}

#[test]
fn module_errors_carry_module_and_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "cat.json", CAT);
    let o = toral(&["dioph-scan", "--matrix", &m, "--subspace", "center", "--radius", "10"], &[]);
    let e = stderr_json(&o);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(e["error"]["module"], "harmonic");
    assert_eq!(e["error"]["kind"], "InvalidInput");
    assert_eq!(e["error"]["parameters"]["radius"], 10);
}

#[test]
fn threads_fall_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("j");
    let r = stdout_json(&toral(
        &["--out", out.to_str().unwrap(), "jets-growth", "--sigma", "0.5", "--eps", "0.01", "--mmax", "3", "--nmax", "12"],
        &[("TORAL_LAB_THREADS", "1")],
    ));
    assert_eq!(r["config"]["threads"], 1);
    assert_eq!(r["result"]["holds"], true);
    let csv = fs::read_to_string(out.join("growth.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 13);
}

#[test]
fn report_summarizes_run_directories() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "cat.json", CAT);
    let runs = dir.path().join("runs");
    let scan = runs.join("scan");
    stdout_json(&toral(&["--out", scan.to_str().unwrap(), "dioph-scan", "--matrix", &m, "--radius", "50", "--trace"], &[]));
    assert!(scan.join("scan.csv").is_file());
    let jets = runs.join("jets");
    stdout_json(&toral(
        &[
            "--out",
            jets.to_str().unwrap(),
            "jets-growth",
            "--sigma",
            "0.5",
            "--lambda",
            "0.3",
            "--eps",
            "0.02",
            "--mmax",
            "2",
            "--nmax",
            "10",
        ],
        &[],
    ));
    let r = stdout_json(&toral(&["report", "--dir", runs.to_str().unwrap()], &[]));
    let rows = r["result"]["reports"].as_array().unwrap();
    let commands: Vec<&str> = rows.iter().map(|x| x["command"].as_str().unwrap()).collect();
    assert_eq!(commands, ["jets-growth", "dioph-scan"]);
    assert!(rows[1]["headline"]["empirical_k"].as_f64().unwrap() > 0.0);
    assert_eq!(rows[0]["headline"]["kind"], "two-rate");
}
