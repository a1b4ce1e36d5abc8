use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn saf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_saf"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn gen(dir: &Path) {
    let out = saf(
        dir,
        &[
            "gen", "--n", "20", "--m", "100", "--seed", "3", "--model-out", "m.txt", "--obs-out",
            "o.txt", "--truth-out", "x.txt",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn solve_writes_solution_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    let out = saf(
        dir.path(),
        &["solve", "--model", "m.txt", "--obs", "o.txt", "--out", "z.txt", "--trace", "t.csv", "--truth", "x.txt"],
    );
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let iters: usize = stderr
        .split(" after ")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .and_then(|s| s.parse().ok())
        .expect("iteration count reported");
    let trace = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + iters + 1);
    assert_eq!(fs::read_to_string(dir.path().join("z.txt")).unwrap().lines().count(), 20);
    let nmse: f64 = stderr.rsplit(' ').next().unwrap().trim().parse().unwrap();
    assert!(nmse < 1e-5);
}

#[test]
fn empty_observation_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    fs::write(dir.path().join("empty.txt"), "").unwrap();
    let out = saf(dir.path(), &["solve", "--model", "m.txt", "--obs", "empty.txt", "--out", "z.txt"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));
}

#[test]
fn dimension_mismatch_names_both_sizes() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    let obs = fs::read_to_string(dir.path().join("o.txt")).unwrap();
    let short: String = obs.lines().take(60).map(|l| format!("{l}\n")).collect();
    fs::write(dir.path().join("short.txt"), short).unwrap();
    let out = saf(dir.path(), &["solve", "--model", "m.txt", "--obs", "short.txt", "--out", "z.txt"]);
    assert!(!out.status.success());
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("60") && msg.contains("100"), "{msg}");
}

#[test]
fn sweep_csv_is_reproducible_and_config_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), "# small sweep\nn = 20\nratios = 3,4\ntrials = 5\nalgo = saf,af\n").unwrap();
    for out in ["a.csv", "b.csv"] {
        let o = saf(dir.path(), &["sweep", "--config", "run.cfg", "--trials", "2", "--workers", "2", "--out", out]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    // 2 ratios × 2 trials × 2 algorithms, plus header.
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 9);
    assert!(dir.path().join("a.timing.csv").exists());
}

#[test]
fn cdp_writes_recovered_image() {
    let dir = tempfile::tempdir().unwrap();
    let mut pgm = b"P5\n8 8\n255\n".to_vec();
    pgm.extend((0..64u8).map(|v| v * 4));
    fs::write(dir.path().join("in.pgm"), pgm).unwrap();
    let o = saf(
        dir.path(),
        &["cdp", "--image", "in.pgm", "--masks", "6", "--trials", "1", "--out", "cdp.csv", "--out-image", "rec"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec = fs::read(dir.path().join("rec_k6_saf.pgm")).unwrap();
    assert!(rec.starts_with(b"P5\n8 8\n255\n"));

    fs::write(dir.path().join("bad.pgm"), b"P5\n8 8\n255\n\x00\x01").unwrap();
    let o = saf(dir.path(), &["cdp", "--image", "bad.pgm", "--trials", "1"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("byte"));
}

#[test]
fn verify_kernel_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = saf(dir.path(), &["verify-kernel", "--samples", "20000", "--grid", "2000"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.matches("PASS").count(), 4, "{text}");
}
