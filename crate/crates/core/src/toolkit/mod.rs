//! Atomic, policy-guarded tools: file read/write, directory listing, grep
//! search and shell execution, all confined to a sandbox root.

mod fs;
mod grep;
mod policy;
mod shell;
mod spec;

use serde::{Deserialize, Serialize};

pub use fs::{is_binary, list_dir, read_file, write_file, WriteMode, DEFAULT_READ_LINES};
pub use grep::{format_hits, grep_search, GrepHit, DEFAULT_MAX_HITS};
pub use policy::{resolve_in_root, SandboxPolicy};
pub use shell::{bash_exec, spawn_confined, terminate_group};
pub use spec::{atomic_tool_specs, Danger, ParamSpec, ParamType, ToolRegistry, ToolSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    None,
    NotFound,
    Denied,
    Timeout,
    TooLarge,
    Conflict,
    Io,
}

/// Captured result of one tool invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolOutcome {
    pub ok: bool,
    pub content: String,
    pub truncated: bool,
    pub exit_code: Option<i32>,
    pub duration_ms: u64,
    pub error_kind: ErrorKind,
}

impl ToolOutcome {
    pub fn success(content: impl Into<String>) -> Self {
        Self {
            ok: true,
            content: content.into(),
            truncated: false,
            exit_code: None,
            duration_ms: 0,
            error_kind: ErrorKind::None,
        }
    }

    pub fn failure(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            ok: false,
            content: message.into(),
            truncated: false,
            exit_code: None,
            duration_ms: 0,
            error_kind: kind,
        }
    }

    /// Applies the output cap to `content`, setting `truncated` when it bites.
    pub fn capped(mut self, cap: usize) -> Self {
        if truncate_utf8(&mut self.content, cap) {
            self.truncated = true;
        }
        self
    }

    pub fn with_duration(mut self, started: std::time::Instant) -> Self {
        self.duration_ms = started.elapsed().as_millis() as u64;
        self
    }
}

impl From<ToolError> for ToolOutcome {
    fn from(e: ToolError) -> Self {
        let kind = match &e {
            ToolError::Denied(_) => ErrorKind::Denied,
            ToolError::NotFound(_) => ErrorKind::NotFound,
            ToolError::InvalidPolicy(_) | ToolError::BadPattern(_) | ToolError::Io(_) => ErrorKind::Io,
        };
        ToolOutcome::failure(kind, e.to_string())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ToolError {
    #[error("invalid sandbox policy: {0}")]
    InvalidPolicy(String),
    #[error("access denied: '{0}' resolves outside the sandbox root")]
    Denied(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("bad pattern: {0}")]
    BadPattern(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Cuts `s` to at most `cap` bytes on a char boundary. Returns whether it cut.
pub fn truncate_utf8(s: &mut String, cap: usize) -> bool {
    if s.len() <= cap {
        return false;
    }
    let mut end = cap;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    s.truncate(end);
    true
}
