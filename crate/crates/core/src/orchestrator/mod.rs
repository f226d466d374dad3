//! The single-agent loop: transcript, tool dispatch, approval gate, task
//! tracking and bounded self-correction of failed solver runs.
//!
//! Every externally visible change goes through an [`EventRecord`]; the
//! session's view is the fold of its own log, so replaying a stored log
//! reconstructs the same state.

mod events;
mod prompt;
mod session;
mod tasks;
mod tools;

use serde::{Deserialize, Serialize};

pub use events::{fold, strip_timestamps, transition_allowed, EventKind, EventRecord, FoldError, SessionView};
pub use prompt::{render_system_prompt, DEFAULT_SYSTEM_TEMPLATE};
pub use session::{feedback_text, EventSink, GateDecision, Session, SessionConfig};
pub use tasks::{is_acyclic, plan_create, plan_update, render_tasks, TaskError, TaskItem, TaskStatus};
pub use tools::{
    agent_tool_specs, danger_of, dispatch_tool, outcome_summary, outcome_text, report_path, run_study_with_report,
    ToolContext, REPORT_FILE, STUDIES_DIR, TUTORIAL_PREFIX,
};

use crate::llm::{LlmError, ToolCallRequest};
use crate::runmgr::DiagnosticKind;

pub const DEFAULT_LOOP_BUDGET: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Idle,
    AwaitingModel,
    AwaitingTool,
    AwaitingApproval,
    AwaitingUser,
    Failed,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionPolicy {
    pub max_attempts: u32,
    pub include_log_tail_lines: usize,
}

impl Default for CorrectionPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            include_log_tail_lines: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApprovalRequest {
    pub id: String,
    pub tool_call: ToolCallRequest,
    pub rationale: String,
    pub created_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Approve,
    Deny,
}

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("session is {actual:?}; this operation needs {expected}")]
    InvalidState { expected: &'static str, actual: SessionState },
    #[error(transparent)]
    Provider(#[from] LlmError),
    #[error("more than {0} model-tool iterations in one turn")]
    LoopBudgetExceeded(usize),
    #[error("unknown tool '{0}'")]
    UnknownTool(String),
    #[error("unknown approval '{0}'")]
    UnknownApproval(String),
    #[error("approval '{0}' was already resolved")]
    StaleApproval(String),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("the run exited cleanly; nothing to correct")]
    NothingToCorrect,
    #[error("self-correction gave up after {attempts} attempts ({kind})")]
    CorrectionExhausted { attempts: u32, kind: DiagnosticKind },
    #[error("run failed to start: {0}")]
    Launch(String),
    #[error("event log write failed: {0}")]
    Persist(String),
    #[error(transparent)]
    Fold(#[from] FoldError),
    #[error("session is read-only")]
    ReadOnly,
    #[error("invalid configuration: {0}")]
    Config(String),
}
