use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_wulffkit");

const CONFIG: &str = r#"{
  "norm": {"variant": "ellipsoidal", "A": [[4.0, 0.0], [0.0, 1.0]]},
  "bodies": [
    {"variant": "wulff", "name": "wulff", "center": [0.0, 0.0], "scale": 1.0},
    {"variant": "hpolytope", "name": "square", "A": [[1,0],[-1,0],[0,1],[0,-1]], "b": [1,1,1,1]}
  ],
  "seed": 3,
  "tasks": [
    {"task": "norm-check", "samples": 200},
    {"task": "measures", "bodies": [0], "method": "direct", "resolution": 256},
    {"task": "measures", "bodies": [1], "method": "sector_exact", "regions": "faces"},
    {"task": "identities", "bodies": [0], "checks": ["minkowski", "heintze_karcher"], "resolution": 256}
  ]
}"#;

fn run(args: &[&str], env_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("WULFFKIT_OUTPUT_DIR");
    if let Some(d) = env_dir {
        cmd.env("WULFFKIT_OUTPUT_DIR", d);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn csv_value(path: &Path, key: &str) -> f64 {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let headers = reader.headers().unwrap().clone();
    let k = headers.iter().position(|h| h == "key").unwrap();
    let v = headers.iter().position(|h| h == "value").unwrap();
    for rec in reader.records() {
        let rec = rec.unwrap();
        if &rec[k] == key {
            return rec[v].parse().unwrap();
        }
    }
    panic!("{key} not in {}", path.display());
}

#[test]
fn run_writes_reports_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let out = tmp.path().join("out");
    let o = run(&["run", &cfg, "--output-dir", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["norm-check-0", "measures-1", "measures-2", "identities-3"] {
        assert!(out.join(format!("{name}.json")).is_file(), "{name}.json");
        assert!(out.join(format!("{name}.csv")).is_file(), "{name}.csv");
    }
    assert!(out.join("summary.csv").is_file());
    // Unit Wulff shape of diag(4,1): C_0 = area = 2 pi, C_1 = 2 * area.
    let c0 = csv_value(&out.join("measures-1.csv"), "C0@whole");
    assert!((c0 - 2.0 * std::f64::consts::PI).abs() < 1e-3, "{c0}");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("identities-3.json")).unwrap()).unwrap();
    assert!(json.is_object() || json.is_array());
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let env_dir = tmp.path().join("from-env");
    let o = run(
        &["norm-check", "--norm", r#"{"variant":"perturbed","dimension":3,"epsilon":0.1}"#, "--samples", "100"],
        Some(&env_dir),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(env_dir.join("norm-check-0.csv").is_file());
}

#[test]
fn flag_wins_over_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let env_dir = tmp.path().join("env");
    let flag_dir = tmp.path().join("flag");
    let o = run(
        &["norm-check", "--norm", r#"{"variant":"euclidean","dimension":2}"#, "--output-dir", flag_dir.to_str().unwrap()],
        Some(&env_dir),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(flag_dir.join("norm-check-0.json").is_file());
    assert!(!env_dir.exists());
}

#[test]
fn conflicting_flag_and_config_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let o = run(&["run", &cfg, "--seed", "4"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    // An equal value is not a conflict.
    let out = tmp.path().join("out");
    let o = run(&["run", &cfg, "--seed", "3", "--output-dir", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn invalid_configs_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"norm": {"variant": "euclidean", "dimension": 2}, "tasks": [{"task": "bogus"}]}"#,
        r#"{"norm": {"variant": "euclidean", "dimension": 2}, "tasks": [], "extra": 1}"#,
        r#"{"norm": {"variant": "ellipsoidal", "A": [[1.0, 0.0], [0.0, -1.0]]}, "tasks": [{"task": "norm-check"}]}"#,
        r#"{"norm": {"variant": "euclidean", "dimension": 3}, "bodies": [{"variant": "wulff", "center": [0, 0], "scale": 1}], "tasks": []}"#,
        "not json",
    ];
    for text in cases {
        let cfg = write_config(tmp.path(), text);
        let o = run(&["run", &cfg, "--output-dir", tmp.path().join("o").to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(2), "{text}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = run(&["run", tmp.path().join("missing.json").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_task_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    // Far too few samples for a decision.
    let o = run(
        &[
            "detect-wulff",
            "--body",
            r#"{"variant":"ellipsoid","center":[0,0],"M":[[1,0],[0,0.25]]}"#,
            "--norm",
            r#"{"variant":"euclidean","dimension":2}"#,
            "--samples",
            "2000",
            "--output-dir",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn outputs_do_not_depend_on_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"{
      "norm": {"variant": "perturbed", "dimension": 2, "epsilon": 0.15},
      "bodies": [{"variant": "ellipsoid", "center": [0.1, 0.0], "M": [[1.0, 0.0], [0.0, 0.25]]}],
      "tasks": [{"task": "tube-fit", "samples": 100000, "regions": "quadrants"}]
    }"#;
    let cfg = write_config(tmp.path(), text);
    let mut files = Vec::new();
    for w in ["1", "3"] {
        let out = tmp.path().join(format!("w{w}"));
        let o = run(&["run", &cfg, "--workers", w, "--output-dir", out.to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(0));
        files.push((
            std::fs::read(out.join("tube-fit-0.csv")).unwrap(),
            std::fs::read(out.join("tube-fit-0.json")).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
}
