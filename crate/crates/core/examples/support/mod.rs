//! Shared setup for the examples: a scratch sandbox whose `PATH` carries the
//! stand-in solver, backed by the example binary itself.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use flamepilot::runmgr::stub;
use flamepilot::toolkit::SandboxPolicy;

pub fn fixtures() -> PathBuf {
    flamepilot::scenario::fixtures_dir()
}

pub struct Sandbox {
    _tmp: tempfile::TempDir,
    pub policy: SandboxPolicy,
}

impl Sandbox {
    /// Call `stub::dispatch_if_requested()` first thing in `main`, since the
    /// solver wrapper re-enters the current executable.
    pub fn with_stub() -> Self {
        let tmp = tempfile::tempdir().expect("tempdir");
        let work = tmp.path().join("work");
        std::fs::create_dir(&work).unwrap();
        let exe = std::env::current_exe().unwrap();
        let bin = tmp.path().join("bin");
        stub::install(&bin, &exe, &["stub-solver"]).unwrap();
        let policy = SandboxPolicy::new(&work).unwrap().with_path_prefix(bin);
        Self { _tmp: tmp, policy }
    }

    pub fn root(&self) -> &Path {
        &self.policy.root
    }

    pub fn copy_in(&self, src: &Path, rel: &str) -> PathBuf {
        let dst = self.root().join(rel);
        for entry in walkdir::WalkDir::new(src) {
            let entry = entry.unwrap();
            let target = dst.join(entry.path().strip_prefix(src).unwrap());
            if entry.file_type().is_dir() {
                std::fs::create_dir_all(&target).unwrap();
            } else {
                std::fs::copy(entry.path(), &target).unwrap();
            }
        }
        dst
    }
}
