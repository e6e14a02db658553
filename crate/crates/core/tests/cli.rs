use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
strategy = "basic"
target_market = "M1"
seed = 3

[split]
train = { start = "2013-01-01", end = "2013-03-22" }
validation = { start = "2013-03-22", end = "2013-04-05" }
test = { start = "2013-04-05", end = "2013-04-12" }

[train_config]
max_epochs = 4

[fine_tune_config]
max_epochs = 4

[data.synthetic]
seed = 2
n_markets = 3
days = 101
correlation = 0.9
"#;

fn epf(dir: &Path, args: &[&str]) -> Output {
    let config = dir.join("config.toml");
    std::fs::write(&config, CONFIG).unwrap();
    Command::new(env!("CARGO_BIN_EXE_epf"))
        .arg("--config")
        .arg(&config)
        .arg("--out-dir")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn run_writes_report_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = epf(dir.path(), &["run"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("out/M1/basic");
    for f in ["report.json", "metrics.csv", "panel.csv"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let report = epf_transfer::experiments::EvaluationReport::load(run.join("report.json")).unwrap();
    report.verify().unwrap();
    assert_eq!(report.panel.n_days(), 7);
}

#[test]
fn grid_then_dm() {
    let dir = tempfile::tempdir().unwrap();
    let out = epf(dir.path(), &["grid"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let root = dir.path().join("out");
    let reports = glob_reports(&root);
    assert_eq!(reports, 21);
    let summary = std::fs::read_to_string(root.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 3 * 4);

    let out = epf(dir.path(), &["dm"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for m in ["M1", "M2", "M3"] {
        let text = std::fs::read_to_string(root.join(m).join("dm_pvalues.csv")).unwrap();
        assert_eq!(text.lines().count(), 8);
    }
}

fn glob_reports(root: &Path) -> usize {
    std::fs::read_dir(root)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .flat_map(|m| std::fs::read_dir(m.path()).unwrap().filter_map(|e| e.ok()))
        .filter(|r| r.path().join("report.json").is_file())
        .count()
}

#[test]
fn seeds_flag_writes_mean_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = epf(dir.path(), &["--seeds", "2", "run"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let root = dir.path().join("out");
    assert!(root.join("seed_3/M1/basic/report.json").is_file());
    assert!(root.join("seed_4/M1/basic/report.json").is_file());
    assert!(root.join("metrics_mean.csv").is_file());
}

#[test]
fn failures_are_one_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_epf"))
        .args(["--config", "/nonexistent/config.toml", "run"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.trim_end().lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert!(v["error"].is_string());
    assert!(v["message"].is_string());

    let out = epf(dir.path(), &["sweep", "--fractions", "0"]);
    assert!(!out.status.success());
    let v: serde_json::Value = serde_json::from_str(String::from_utf8(out.stderr).unwrap().trim()).unwrap();
    assert!(v["error"].is_string());
}

#[test]
fn synth_then_describe() {
    let dir = tempfile::tempdir().unwrap();
    let out = epf(dir.path(), &["synth", "--markets", "2", "--days", "30"]);
    assert!(out.status.success());
    let a = dir.path().join("out/M1.csv");
    let out = epf(dir.path(), &["describe", a.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 2);
}
