use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn tzlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tzlab"))
        .args(args)
        .env("TZLAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn dim_prints_twelve_digits() {
    let cantor = data("cantor.json");
    let out = tzlab(&["dim", "--ifs", cantor.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "0.630929753571");
}

#[test]
fn touching_system_fails_certification() {
    let touching = data("touching.json");
    let out = tzlab(&["certify-ssc", "--ifs", touching.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let cert: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(cert["t_lo"].as_f64(), Some(0.0));
}

#[test]
fn zoom_refuses_uncertified_system() {
    let touching = data("touching.json");
    let out = tzlab(&[
        "zoom",
        "--ifs",
        touching.to_str().unwrap(),
        "--coding",
        "(0)",
        "--w",
        "3",
        "--N",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_tan_on_cantor() {
    let cantor = data("cantor.json");
    let out = tzlab(&["verify", "tan", "--ifs", cantor.to_str().unwrap(), "--coding", "(0)"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["manifest_sha256"].as_str().unwrap().len(), 64);
    assert!(v["report"]["residual"].as_f64().unwrap() <= 1e-6);
    assert_eq!(v["report"]["verdict"], serde_json::Value::Bool(true));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(tzlab(&["bogus"]).status.code(), Some(1));
    assert_eq!(tzlab(&["dim"]).status.code(), Some(1));
    let cantor = data("cantor.json");
    let out = tzlab(&[
        "zoom",
        "--ifs",
        cantor.to_str().unwrap(),
        "--coding",
        "0(2)",
        "--w",
        "1",
        "--N",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = tzlab(&["dim", "--ifs", "/nonexistent/ifs.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_spec_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"dim": 1, "maps": [{"ratio": 1.5, "shift": [0]}, {"ratio": 0.5, "shift": [1]}]}"#,
    )
    .unwrap();
    let out = tzlab(&["dim", "--ifs", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("maps[0].ratio"), "{err}");
}

#[test]
fn outputs_are_deterministic() {
    let rot = data("rot90.json");
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let path = dir.path().join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_tzlab"))
            .args([
                "zoom",
                "--ifs",
                rot.to_str().unwrap(),
                "--coding",
                "(0)",
                "--w",
                "4",
                "--N",
                "0.5",
            ])
            .args(["--eps", "0.01", "--out"])
            .arg(&path)
            .env("TZLAB_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        (std::fs::read(&path).unwrap(), path)
    };
    let (a, path_a) = run("a.csv", "1");
    let (b, _) = run("a.csv", "4");
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("# manifest_sha256="));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(format!("{}.manifest.json", path_a.display())).unwrap()).unwrap();
    assert!(manifest["wall_time_s"].as_f64().is_some());
    assert_eq!(manifest["ifs_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn limit_models_writes_index() {
    let cantor = data("cantor.json");
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("models");
    let out = tzlab(&[
        "limit-models",
        "--ifs",
        cantor.to_str().unwrap(),
        "--coding",
        "(01)",
        "--N",
        "1",
        "--depths",
        "0..16",
        "--eps",
        "0.01",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let index: serde_json::Value = serde_json::from_slice(&std::fs::read(out_dir.join("index.json")).unwrap()).unwrap();
    let models = index["report"]["models"].as_array().unwrap();
    assert_eq!(models.len(), 2);
    for m in models {
        assert_eq!(m["certified"], serde_json::Value::Bool(true));
        assert!(out_dir.join(m["file"].as_str().unwrap()).exists());
    }
}

#[test]
fn measure_brackets_first_cylinder() {
    let cantor = data("cantor.json");
    let out = tzlab(&[
        "measure",
        "--ifs",
        cantor.to_str().unwrap(),
        "--region",
        "box 0 0.3333333333333333",
        "--tol",
        "1e-6",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let parts: Vec<f64> = text.split_whitespace().map(|t| t.parse().unwrap()).collect();
    assert!(parts[0] <= 0.5 && 0.5 <= parts[1] && parts[1] - parts[0] <= 1e-6);
}
