use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn deepsafe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deepsafe"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn cluster_then_analyze_writes_a_plan() {
    let out = tempfile::tempdir().unwrap();
    let net = fixture("tiny_net.json");
    let data = fixture("tiny.csv");
    let r = deepsafe(&["cluster", "--dataset", s(&data), "--out", s(out.path())]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    let r = deepsafe(&["analyze", "--network", s(&net), "--out", s(out.path())]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );

    let regions = deepsafe::clustering::read_regions(out.path()).unwrap();
    assert!(regions.iter().all(|r| r.is_pure()));
    let plan = deepsafe::VerificationPlan::read(out.path()).unwrap();
    assert!(!plan.is_empty());
    assert!(plan
        .entries
        .iter()
        .all(|e| regions.iter().any(|r| r.id == e.region_id)));
}

#[test]
fn analyze_without_regions_is_an_io_error() {
    let out = tempfile::tempdir().unwrap();
    let r = deepsafe(&[
        "analyze",
        "--network",
        s(&fixture("tiny_net.json")),
        "--out",
        s(out.path()),
    ]);
    assert_eq!(r.status.code(), Some(3));
}

#[test]
fn verify_with_zero_top_k_reports_nothing() {
    let out = tempfile::tempdir().unwrap();
    let r = deepsafe(&[
        "verify",
        "--network",
        s(&fixture("tiny_net.json")),
        "--dataset",
        s(&fixture("tiny.csv")),
        "--out",
        s(out.path()),
        "--top-k",
        "0",
    ]);
    assert_eq!(r.status.code(), Some(0));
    let text = std::fs::read_to_string(out.path().join("report.json")).unwrap();
    assert_eq!(text.trim(), "[]");
}

#[test]
fn report_without_artifacts_exits_3() {
    let out = tempfile::tempdir().unwrap();
    let r = deepsafe(&["report", "--out", s(out.path())]);
    assert_eq!(r.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&r.stderr).contains("report.json"));
}

#[test]
fn usage_errors_exit_3() {
    assert_eq!(
        deepsafe(&["verify", "--metric", "l7"]).status.code(),
        Some(3)
    );
    assert_eq!(deepsafe(&[]).status.code(), Some(3));
    assert_eq!(
        deepsafe(&["verify", "--dataset", "/nonexistent.csv"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(deepsafe(&["--help"]).status.code(), Some(0));
}

#[test]
fn flags_override_the_config_file() {
    let out = tempfile::tempdir().unwrap();
    let config = out.path().join("run.toml");
    std::fs::write(
        &config,
        format!(
            "network = {:?}\ndataset = {:?}\nout_dir = {:?}\ntop_k = 0\n",
            s(&fixture("tiny_net.json")),
            s(&fixture("tiny.csv")),
            s(out.path())
        ),
    )
    .unwrap();
    let r = deepsafe(&["verify", "--config", s(&config)]);
    assert_eq!(r.status.code(), Some(0));
    let empty = std::fs::read_to_string(out.path().join("report.json")).unwrap();
    assert_eq!(empty.trim(), "[]");

    std::fs::remove_file(out.path().join("plan.json")).unwrap();
    let r = deepsafe(&["verify", "--config", s(&config), "--top-k", "2"]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    let reports = deepsafe::pipeline::read_reports(out.path()).unwrap();
    assert_eq!(reports.len(), 2);
}

#[test]
fn stages_are_idempotent() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let r = deepsafe(&[
            "verify",
            "--network",
            s(&fixture("mini_acas_net.json")),
            "--dataset",
            s(&fixture("mini_acas.csv")),
            "--out",
            s(dir.path()),
            "--slice-dims",
            "2,3,4",
        ]);
        assert_eq!(r.status.code(), Some(1), "fixture has counterexamples");
    }
    let mut names: Vec<PathBuf> = Vec::new();
    for entry in walk(a.path()) {
        names.push(entry.strip_prefix(a.path()).unwrap().to_path_buf());
    }
    assert!(names.iter().any(|n| n.starts_with("witnesses")));
    for name in names {
        // verdicts.json carries wall-clock timings
        if name.as_os_str() == "verdicts.json" {
            continue;
        }
        let x = std::fs::read(a.path().join(&name)).unwrap();
        let y = std::fs::read(b.path().join(&name)).unwrap();
        assert!(x == y, "{} differs", name.display());
    }

    let report = deepsafe(&["report", "--out", s(a.path())]);
    assert_eq!(report.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&report.stdout).contains("has adversarial"));
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            files.extend(walk(&path));
        } else {
            files.push(path);
        }
    }
    files
}

#[test]
fn oracle_prints_json() {
    let r = deepsafe(&[
        "oracle",
        "--network",
        s(&fixture("tiny_net.json")),
        "--center=-0.9,-0.9",
        "--radius",
        "0.1",
        "--label",
        "2",
        "--target",
        "0",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    let found = v["kind"] == "found";
    assert_eq!(r.status.code(), Some(if found { 1 } else { 0 }));
    assert!(v["examined"].as_u64().unwrap() > 0);
}
