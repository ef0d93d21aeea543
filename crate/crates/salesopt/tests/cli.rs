use std::path::Path;
use std::process::{Command, Output};

use salesopt::{commands, Config};

const SMALL: &str = "generator.n_accounts = 300\nbandit.hidden = 8\nablation.seeds = 2\nablation.days = 2\n";

fn salesopt(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_salesopt")).args(args).current_dir(dir).output().unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(&path, SMALL).unwrap();
    path.display().to_string()
}

#[test]
fn gen_is_a_thin_wrapper_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    for out in ["a", "b"] {
        let o = salesopt(&["gen", "--seed", "4", "--config", &cfg, "--out", out], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut lib_cfg = Config::parse(SMALL).unwrap();
    lib_cfg.seed = 4;
    let lib = commands::gen(&lib_cfg, &dir.path().join("c")).unwrap();
    assert_eq!(lib.files.len(), 3);
    for name in ["accounts.jsonl", "reps.jsonl", "panel.jsonl"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, std::fs::read(dir.path().join("b").join(name)).unwrap(), "{name}");
        assert_eq!(a, std::fs::read(dir.path().join("c").join(name)).unwrap(), "{name}");
    }
    let other = salesopt(&["gen", "--seed", "5", "--config", &cfg, "--out", "d"], dir.path());
    assert!(other.status.success());
    assert_ne!(
        std::fs::read(dir.path().join("a/accounts.jsonl")).unwrap(),
        std::fs::read(dir.path().join("d/accounts.jsonl")).unwrap()
    );
}

#[test]
fn ablate_prints_one_row_per_variant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = salesopt(&["ablate", "--config", &cfg, "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("medians over 2 seeds"));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/ablation.json")).unwrap()).unwrap();
    assert_eq!(summary["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn replay_command_reads_a_service_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.jsonl");
    {
        let s = salesopt::service::Service::open_or_create(&log, Config::parse(SMALL).unwrap()).unwrap();
        s.run_pipeline().unwrap();
        s.run_pipeline().unwrap();
    }
    let o = salesopt(&["replay", "--log", log.to_str().unwrap(), "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8(o.stdout).unwrap().contains("run-0002"));
    assert!(dir.path().join("out/replay_metrics.json").exists());
}

#[test]
fn bad_config_exits_2_with_a_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "optimizer.nope = 1\n").unwrap();
    for cfg in [path.to_str().unwrap(), "missing.toml"] {
        let o = salesopt(&["gen", "--config", cfg], dir.path());
        assert_eq!(o.status.code(), Some(2));
        let stderr = String::from_utf8(o.stderr).unwrap();
        let line: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
        assert_eq!(line["error"], "config");
        assert!(line["message"].is_string());
    }
    assert!(!dir.path().join("out").exists());
}
