//! Helpers shared by the CLI integration tests: spawning the binary and
//! comparing artifacts.
#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rallycast"))
}

/// Runs the binary from `dir` and asserts a zero exit, returning stdout.
pub fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "`rallycast {}` failed\nstdout: {}\nstderr: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn run(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawning rallycast")
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&read(path))
        .unwrap_or_else(|e| panic!("parsing {}: {e}", path.display()))
}

/// Manifest with the two timestamp fields removed, for byte-independent
/// comparison of reruns.
pub fn manifest_without_timestamps(path: &Path) -> serde_json::Value {
    let mut value = read_json(path);
    let obj = value.as_object_mut().expect("manifest is an object");
    obj.remove("started_at");
    obj.remove("finished_at");
    value
}
