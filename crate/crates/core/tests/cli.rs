//! The `corrlab` binary on small inputs.

use std::process::Command;

fn corrlab() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_corrlab"));
    cmd.env_remove("CORRLAB_CACHE_DIR");
    cmd
}

#[test]
fn enumerate_uses_cache_from_environment() {
    let out = tempfile::tempdir().unwrap();
    let cache = tempfile::tempdir().unwrap();
    let status = corrlab()
        .args(["enumerate", "--max-len", "5", "--shards", "3", "--out"])
        .arg(out.path())
        .env("CORRLAB_CACHE_DIR", cache.path())
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = std::fs::read_to_string(out.path().join("enumerate.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "length,words,classes,primitive_classes");
    assert_eq!(lines[1], "1,4,4,4");
    assert_eq!(lines[5], "5,324,52,48");
    assert_eq!(lines.len(), 6);
    assert!(std::fs::read_dir(cache.path()).unwrap().count() > 0);
}

#[test]
fn count_writes_series() {
    let out = tempfile::tempdir().unwrap();
    let status = corrlab()
        .args(["count", "--max-len", "7", "--config", "schottky-pair", "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = std::fs::read_to_string(out.path().join("counts.csv")).unwrap();
    assert!(csv.starts_with("T,jordan_count,cartan_count,theta_count,censored\n"));
    assert!(out.path().join("truncation_counts.csv").exists());
}

#[test]
fn unknown_configuration_fails_cleanly() {
    let status = corrlab().args(["cone", "--config", "no-such-config"]).output().unwrap();
    assert!(!status.status.success());
    assert!(String::from_utf8_lossy(&status.stderr).contains("no-such-config"));
}
