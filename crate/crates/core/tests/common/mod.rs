#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn copy_dir(src: &Path, dst: &Path) {
    for entry in walkdir::WalkDir::new(src) {
        let entry = entry.unwrap();
        let target = dst.join(entry.path().strip_prefix(src).unwrap());
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&target).unwrap();
        } else {
            std::fs::copy(entry.path(), &target).unwrap();
        }
    }
}

/// Copies a fixture directory into a fresh temp dir, keeping its name.
pub fn staged(fixture: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let src = fixtures().join(fixture);
    let root = dir.path().join(src.file_name().unwrap());
    copy_dir(&src, &root);
    (dir, root)
}

/// Marker counts for one issue type: cleared by the cheap tier, cleared only
/// by the advanced tier, never cleared.
#[derive(Clone, Copy)]
pub struct Markers {
    pub easy: usize,
    pub hard: usize,
    pub stuck: usize,
}

/// Writes a project whose marker counts replay a per-type outcome, spread
/// round-robin over `files` files.
pub fn marker_project(root: &Path, files: usize, bugs: Markers, vulns: Markers, smells: Markers) {
    let mut per_file: Vec<Vec<&str>> = vec![Vec::new(); files];
    let mut i = 0;
    let mut put = |tag: &'static str, n: usize| {
        for _ in 0..n {
            per_file[i % files].push(tag);
            i += 1;
        }
    };
    put("@bug-easy", bugs.easy);
    put("@bug-hard", bugs.hard);
    put("@vuln-easy", vulns.easy);
    put("@vuln-hard", vulns.hard);
    put("@smell-easy", smells.easy);
    put("@smell-hard", smells.hard);
    put("@smell-stuck", smells.stuck);
    assert_eq!(bugs.stuck + vulns.stuck, 0, "only smells have a stuck marker");
    for (f, tags) in per_file.iter().enumerate() {
        let dir = root.join(format!("pkg{:02}", f % 23));
        std::fs::create_dir_all(&dir).unwrap();
        let mut text = format!("# module {f}\n");
        for (n, t) in tags.iter().enumerate() {
            text.push_str(&format!("v{n} = step({n})  # {t}\n"));
        }
        std::fs::write(dir.join(format!("m{f:03}.py")), text).unwrap();
    }
}

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn wall(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wall"));
    cmd.args(args).env_remove("WALL_CONFIG").env_remove("SONAR_TOKEN");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("run wall");
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}
