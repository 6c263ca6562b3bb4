use std::path::Path;
use std::process::{Command, Output};

use rssbound::io::{import_trace, read_table};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rssbound"));
    c.env_remove("RSSBOUND_OUTPUT_DIR");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().arg("--output-dir").arg(dir).args(args).output().unwrap()
}

#[test]
fn simulate_then_estimate() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["--seed", "3", "simulate", "--continuous"]);
    assert!(out.status.success());
    let trace = import_trace(&tmp.path().join("trace.csv")).unwrap();
    assert_eq!(trace.len(), 300);
    assert_eq!(trace.seed, Some(3));

    let t = tmp.path().join("trace.csv");
    let out = run(tmp.path(), &["estimate", "--trace", t.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(tmp.path().join("estimate.csv")).unwrap();
    let (cols, rows) = read_table(&text).unwrap();
    assert_eq!(cols[1], "rate_bpm");
    let bpm: f64 = rows[0][1].parse().unwrap();
    assert!((bpm - 15.0).abs() < 1.0, "{bpm}");
}

#[test]
fn crb_prints_both_stds_and_stamps_provenance() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["--seed", "21", "crb"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("bpm") && stdout.contains("dB"), "{stdout}");
    let text = std::fs::read_to_string(tmp.path().join("crb.csv")).unwrap();
    assert!(text.contains("# seed: 21"));
    let hash = text
        .lines()
        .find_map(|l| l.strip_prefix("# config_sha256: "))
        .unwrap();
    assert_eq!(hash.len(), 64);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(tmp.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(tmp.path(), &["sweep", "--axis", "phase"]).status.code(), Some(2));
    assert_eq!(run(tmp.path(), &["crb", "--no-such-flag"]).status.code(), Some(2));

    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[acquisition]\nsample_rate = -1.0\n").unwrap();
    let out = run(tmp.path(), &["--config", cfg.to_str().unwrap(), "crb"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("acquisition.sample_rate"));

    let missing = tmp.path().join("absent.csv");
    let out = run(tmp.path(), &["estimate", "--trace", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    assert_eq!(run(tmp.path(), &["selftest"]).status.code(), Some(0));
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("env-out");
    let out = bin()
        .env("RSSBOUND_OUTPUT_DIR", &dir)
        .args(["mitigate"])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.join("mitigation.csv").exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        "seed = 5\n[averaging]\nphases = 4\noffsets = 9\n[sweep]\nstep_values = [1.0, 2.0, 4.0]\ntrials = 20\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let d = tmp.path().join(name);
        let out = run(&d, &["--config", cfg.to_str().unwrap(), "sweep", "--axis", "step"]);
        assert!(out.status.success());
        outputs.push(std::fs::read(d.join("sweep_step_delta.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let (_, rows) = read_table(std::str::from_utf8(&outputs[0]).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
}
