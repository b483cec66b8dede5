use std::path::Path;
use std::process::{Command, Output};

fn pitchguard(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pitchguard"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn entries(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn version_is_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = pitchguard(dir.path(), &["--version"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, format!("pitchguard {}\n", env!("CARGO_PKG_VERSION")));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        pitchguard(dir.path(), &["frobnicate"]).status.code(),
        Some(1)
    );
    assert_eq!(
        pitchguard(dir.path(), &["dtw", "--a", "x.csv"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(pitchguard(dir.path(), &["help"]).status.code(), Some(0));
}

#[test]
fn missing_input_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("b.csv"), "1\n2\n").unwrap();
    let out = pitchguard(
        dir.path(),
        &[
            "dtw",
            "--a",
            "nope.csv",
            "--b",
            "b.csv",
            "--path-out",
            "p.csv",
            "--out",
            "r.json",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
    assert_eq!(entries(dir.path()), vec!["b.csv"]);
}

#[test]
fn invalid_config_value_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert!(
        pitchguard(dir.path(), &["synth", "--seed", "2", "--out", "data"])
            .status
            .success()
    );
    std::fs::write(dir.path().join("bad.cfg"), "epsilon_min = -1\n").unwrap();
    let exposure = data.join("exposure.csv");
    let injuries = data.join("injuries.csv");
    let out = pitchguard(
        dir.path(),
        &[
            "gp-sweep",
            "--exposure",
            exposure.to_str().unwrap(),
            "--injuries",
            injuries.to_str().unwrap(),
            "--config",
            "bad.cfg",
            "--out",
            "s.json",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("s.json").exists());

    std::fs::write(dir.path().join("typo.cfg"), "gama_count = 3\n").unwrap();
    let out = pitchguard(
        dir.path(),
        &[
            "gp-sweep",
            "--exposure",
            exposure.to_str().unwrap(),
            "--injuries",
            injuries.to_str().unwrap(),
            "--config",
            "typo.cfg",
            "--out",
            "s.json",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn rank_deficient_fit_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("d.csv"),
        "y,a,b\n1,1,2\n0,2,4\n3,3,6\n2,4,8\n5,5,10\n",
    )
    .unwrap();
    let out = pitchguard(
        dir.path(),
        &[
            "glm",
            "--family",
            "poisson",
            "--data",
            "d.csv",
            "--formula",
            "y ~ a + b",
            "--out",
            "g.json",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(!dir.path().join("g.json").exists());
}

#[test]
fn report_records_seed_config_and_invocation() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("s.cfg"),
        "subjects = 4\nseason_days = 40\ngps_features = 6\nplanted_features = 2\n",
    )
    .unwrap();
    let out = pitchguard(
        dir.path(),
        &[
            "synth", "--seed", "17", "--jobs", "2", "--config", "s.cfg", "--out", "cohort",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = json(&dir.path().join("cohort/synth.json"));
    assert_eq!(report["tool"], "pitchguard");
    assert_eq!(report["command"], "synth");
    assert_eq!(report["seed"], 17);
    assert_eq!(report["config"]["subjects"], "4");
    let invocation: Vec<&str> = report["invocation"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(
        invocation,
        [
            "pitchguard",
            "synth",
            "--seed",
            "17",
            "--config",
            "s.cfg",
            "--out",
            "cohort"
        ]
    );

    let exposure = std::fs::read_to_string(dir.path().join("cohort/exposure.csv")).unwrap();
    let subjects: std::collections::BTreeSet<&str> = exposure
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').next())
        .collect();
    assert_eq!(subjects.len(), 4);
}

#[test]
fn cv_report_has_one_row_per_fold() {
    let dir = tempfile::tempdir().unwrap();
    assert!(
        pitchguard(dir.path(), &["synth", "--seed", "3", "--out", "data"])
            .status
            .success()
    );
    let out = pitchguard(
        dir.path(),
        &[
            "cv",
            "--data",
            "data/planted.csv",
            "--class",
            "injured",
            "--model",
            "constant",
            "--repeats",
            "3",
            "--folds",
            "4",
            "--out",
            "cv.json",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = json(&dir.path().join("cv.json"));
    let rows = report["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 12);
    assert_eq!(rows[0]["unit"], "repeat1_fold1");
    assert_eq!(report["result"]["aggregate"]["kappa"]["mean"], 0.0);
}

#[test]
fn dtw_prints_distance_and_path() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.csv"), "1\n2\n3\n").unwrap();
    std::fs::write(dir.path().join("b.csv"), "value\n2\n3\n").unwrap();
    let out = pitchguard(
        dir.path(),
        &["dtw", "--a", "a.csv", "--b", "b.csv", "--path-out", "p.csv"],
    );
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "1\n");
    assert_eq!(
        std::fs::read_to_string(dir.path().join("p.csv")).unwrap(),
        "i,j\n1,1\n2,1\n3,2\n"
    );
}
