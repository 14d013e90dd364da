#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn qbheat(args: &[&str]) -> Output {
    qbheat_env(args, &[])
}

pub fn qbheat_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qbheat"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn qbheat")
}

/// Runs and asserts success, returning stdout.
pub fn ok(args: &[&str]) -> String {
    let out = qbheat(args);
    assert!(
        out.status.success(),
        "qbheat {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// `gen → fit → report` from the golden spec inside `work`; returns the fit
/// JSON and report CSV paths.
pub fn golden_pipeline(work: &Path) -> (PathBuf, PathBuf) {
    let spec = golden_dir().join("spec.json");
    let fields = work.join("fields");
    let fit = work.join("fit.json");
    let report = work.join("report.csv");
    ok(&[
        "gen",
        "--input",
        path_str(&spec),
        "--output",
        path_str(&fields),
    ]);
    ok(&[
        "fit",
        "--input",
        path_str(&fields),
        "--position",
        "tl",
        "--position",
        "center",
        "--closed-form",
        "--iterative",
        "--steps",
        "200",
        "--output",
        path_str(&fit),
    ]);
    ok(&[
        "report",
        "--input",
        path_str(&fit),
        "--output",
        path_str(&report),
    ]);
    (fit, report)
}

/// Compares against `tests/golden/<name>`; `QBHEAT_BLESS=1` rewrites it.
pub fn matches_golden(actual: &Path, name: &str) -> bool {
    let golden = golden_dir().join(name);
    let bytes = fs::read(actual).unwrap();
    if std::env::var_os("QBHEAT_BLESS").is_some() {
        fs::write(&golden, &bytes).unwrap();
        return true;
    }
    fs::read(golden).map(|g| g == bytes).unwrap_or(false)
}
