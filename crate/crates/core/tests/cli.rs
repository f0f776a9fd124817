use std::path::{Path, PathBuf};
use std::process::Command;

use semiflow::cli_io::{run, RunConfig, Summary};

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs").join(name)
}

fn semiflow(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_semiflow")).args(args).output().unwrap()
}

#[test]
fn repeat_runs_are_byte_identical() {
    let cfg = RunConfig::from_path(&config_path("deviation_suspension_quick.json")).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&cfg, a.path(), true).unwrap();
    run(&cfg, b.path(), true).unwrap();
    for f in ["results.csv", "summary.json", "plot.svg"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn summary_echo_reparses_to_the_config() {
    let cfg = RunConfig::from_path(&config_path("escape_lorenz_quick.json")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run(&cfg, dir.path(), false).unwrap();
    let summary: Summary = serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    let echo = serde_json::to_string(&summary.config).unwrap();
    assert_eq!(RunConfig::from_json(&echo).unwrap(), cfg);
    assert_eq!(summary.rows.len(), 3);
}

#[test]
fn binary_honours_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path("deviation_doubling_quick.json");
    let out1 = dir.path().join("one");
    let out2 = dir.path().join("two");
    let out3 = dir.path().join("three");
    let o = semiflow(&["--config", cfg.to_str().unwrap(), "--out", out1.to_str().unwrap(), "--threads", "1", "--plot"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out1.join("plot.svg").exists());
    let o = semiflow(&["--config", cfg.to_str().unwrap(), "--out", out2.to_str().unwrap(), "--threads", "2"]);
    assert!(o.status.success());
    assert!(!out2.join("plot.svg").exists());
    assert_eq!(std::fs::read(out1.join("results.csv")).unwrap(), std::fs::read(out2.join("results.csv")).unwrap());

    let o = semiflow(&["--config", cfg.to_str().unwrap(), "--out", out3.to_str().unwrap(), "--seed", "99"]);
    assert!(o.status.success());
    assert_ne!(std::fs::read(out1.join("results.csv")).unwrap(), std::fs::read(out3.join("results.csv")).unwrap());
    let summary: Summary = serde_json::from_slice(&std::fs::read(out3.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.seed, 99);
}

#[test]
fn missing_key_reports_config_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"experiment": {"kind": "lorenz-section", "n_points": 5, "d_min": 1e-6, "d_max": 1e-2}}"#).unwrap();
    let o = semiflow(&["--config", bad.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "ConfigInvalid");
    assert!(err["message"].as_str().unwrap().contains("seed"));
}

#[test]
fn unreadable_config_reports_io_error() {
    let o = semiflow(&["--config", "/nonexistent/config.json"]);
    assert!(!o.status.success());
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "IoError");
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        RunConfig::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 5);
}
