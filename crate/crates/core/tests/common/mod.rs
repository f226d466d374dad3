#![allow(dead_code)]

pub mod checks;
pub mod foam_gen;

use std::path::{Path, PathBuf};

use flamepilot::foamdict::FoamValue;
use flamepilot::llm::{ChatMessage, ScriptStep, ScriptedProvider, ToolCallRequest};
use flamepilot::orchestrator::{Session, SessionConfig, ToolContext};
use flamepilot::runmgr::stub;
use flamepilot::study::{apply_edit, ParameterEdit};
use flamepilot::toolkit::SandboxPolicy;
use serde_json::Value;

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn copy_dir(src: &Path, dst: &Path) {
    for entry in walkdir::WalkDir::new(src) {
        let entry = entry.unwrap();
        let rel = entry.path().strip_prefix(src).unwrap();
        let target = dst.join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&target).unwrap();
        } else {
            std::fs::copy(entry.path(), &target).unwrap();
        }
    }
}

/// A temporary workdir with the stand-in solver on the policy's path.
pub struct Workspace {
    pub tmp: tempfile::TempDir,
    pub policy: SandboxPolicy,
}

impl Workspace {
    pub fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let work = tmp.path().join("work");
        std::fs::create_dir(&work).unwrap();
        let bin = tmp.path().join("bin");
        stub::install(&bin, Path::new(env!("CARGO_BIN_EXE_flamepilot")), &["stub-solver"]).unwrap();
        let policy = SandboxPolicy::new(&work).unwrap().with_path_prefix(bin);
        Self { tmp, policy }
    }

    pub fn root(&self) -> &Path {
        &self.policy.root
    }

    /// Copies the JHC fixture to `name`, with a usable time step and the
    /// given stub mode.
    pub fn case(&self, name: &str, mode: &str) -> PathBuf {
        let dst = self.root().join(name);
        copy_dir(&fixture("cases/jhc-mild"), &dst);
        set(&dst, "system/controlDict", "deltaT", FoamValue::Number(0.001));
        set(&dst, "system/controlDict", "stubMode", FoamValue::token(mode));
        dst
    }

    pub fn context(&self) -> ToolContext {
        let mut ctx = ToolContext::new(self.policy.clone());
        ctx.tutorials_root = Some(fixture("tutorials"));
        ctx
    }

    pub fn session(&self, steps: Vec<ScriptStep>, config: SessionConfig) -> Session {
        let provider = ScriptedProvider::new(steps).unwrap();
        Session::new("test", Box::new(provider), self.context(), config)
    }
}

pub fn set(case: &Path, file: &str, key: &str, value: FoamValue) {
    apply_edit(case, &ParameterEdit::new(file.to_string(), key.parse().unwrap(), value)).unwrap();
}

pub fn call(id: &str, tool: &str, args: Value) -> ScriptStep {
    ScriptStep {
        expected_contains: None,
        reply: ChatMessage::assistant_calls("", vec![ToolCallRequest::new(id, tool, args)]),
    }
}

pub fn say(text: &str) -> ScriptStep {
    ScriptStep {
        expected_contains: None,
        reply: ChatMessage::assistant(text),
    }
}

pub fn expecting(mut step: ScriptStep, needle: &str) -> ScriptStep {
    step.expected_contains = Some(needle.to_string());
    step
}
