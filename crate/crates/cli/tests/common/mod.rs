#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_breadthcloud");

pub fn bundled_study() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data/synthetic")
}

/// A scratch copy of the bundled synthetic study.
pub fn study_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(bundled_study()).unwrap() {
        let path = entry.unwrap().path();
        std::fs::copy(&path, dir.path().join(path.file_name().unwrap())).unwrap();
    }
    dir
}

/// Runs the binary in `dir` with a clean environment.
pub fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("BREADTHCLOUD_ENDPOINT")
        .env_remove("BREADTHCLOUD_API_KEY")
        .env_remove("BREADTHCLOUD_MODEL")
        .env_remove("BREADTHCLOUD_TEMPERATURE")
        .output()
        .unwrap()
}

pub fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Directory of the run named by the `latest` pointer.
pub fn latest_run(dir: &Path) -> PathBuf {
    let id = std::fs::read_to_string(dir.join("runs/latest")).unwrap();
    dir.join("runs").join(id.trim())
}
