//! The `genrefine` binary: verbs, flag overrides and exit codes.

use std::path::Path;
use std::process::{Command, Output};

use genrefine::runner::{write_toy_workspace, RunManifest, ToyOptions};

fn genrefine(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genrefine"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn toy(opts: ToyOptions) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_toy_workspace(dir.path(), &opts).unwrap();
    dir
}

#[test]
fn all_verbs_in_order() {
    let dir = toy(ToyOptions {
        n_trials: 2,
        ..Default::default()
    });
    let d = dir.path();
    let split = genrefine(d, &["split", "--config", "config.toml", "--trials", "1", "--seed", "3"]);
    assert_eq!(code(&split), 0, "{}", String::from_utf8_lossy(&split.stderr));
    let m = RunManifest::load(&d.join("out")).unwrap();
    assert_eq!(m.plans.len(), 1);
    assert_eq!(m.config.seeds.root, 3);

    for verb in ["generate", "select", "refine", "evaluate", "report"] {
        let o = genrefine(d, &[verb, "--out", "out"]);
        assert_eq!(code(&o), 0, "{verb}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(d.join("out/reports/report.md").exists());
    assert!(d.join("out/reports/diversity.svg").exists());
    let resumed = genrefine(d, &["generate", "--config", "config.toml", "--resume"]);
    assert_eq!(code(&resumed), 0);
}

#[test]
fn run_verb_prints_the_table() {
    let dir = toy(ToyOptions {
        n_trials: 1,
        ..Default::default()
    });
    let o = genrefine(dir.path(), &["run", "--config", "config.toml", "--strategy", "zerogen,refined"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("| zerogen |") && stdout.contains("| refined |"));
    assert!(!stdout.contains("| supergen |"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = toy(ToyOptions::default());
    let d = dir.path();
    let o = genrefine(d, &["split", "--config", "config.toml", "--dataset", "atis"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("dataset"));
    let o = genrefine(d, &["split", "--config", "config.toml", "--multiplier", "3"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sample_size_multiplier"));
    let o = genrefine(d, &["split", "--config", "config.toml", "--strategy", "best"]);
    assert_eq!(code(&o), 1);
    assert_eq!(code(&genrefine(d, &["split"])), 1);
    assert_eq!(code(&genrefine(d, &["frobnicate"])), 1);
    assert_eq!(code(&genrefine(d, &[])), 1);
    assert_eq!(code(&genrefine(d, &["--help"])), 0);

    std::fs::write(d.join("bad.toml"), "dataset = \"custom\"\n").unwrap();
    assert_eq!(code(&genrefine(d, &["split", "--config", "bad.toml"])), 1);
}

#[test]
fn missing_stages_exit_two() {
    let dir = toy(ToyOptions::default());
    let d = dir.path();
    assert_eq!(code(&genrefine(d, &["generate", "--out", "out"])), 2);
    assert_eq!(code(&genrefine(d, &["split", "--config", "config.toml"])), 0);
    let o = genrefine(d, &["refine", "--out", "out"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("generate"));
    assert_eq!(code(&genrefine(d, &["evaluate", "--out", "out"])), 2);
    assert_eq!(code(&genrefine(d, &["report", "--out", "out"])), 2);
}

#[test]
fn backend_failures_exit_three() {
    let dir = toy(ToyOptions::default());
    let d = dir.path();
    // a script that only knows one intent
    let script = std::fs::read_to_string(d.join("script.jsonl")).unwrap();
    let only: String = script.lines().filter(|l| l.contains("intent_0_0")).map(|l| format!("{l}\n")).collect();
    std::fs::write(d.join("script.jsonl"), only).unwrap();
    assert_eq!(code(&genrefine(d, &["split", "--config", "config.toml"])), 0);
    let o = genrefine(d, &["generate", "--out", "out"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let m = RunManifest::load(&d.join("out")).unwrap();
    assert!(!m.failures.is_empty());
}
