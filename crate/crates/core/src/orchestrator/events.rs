//! Event records and the fold that turns a record sequence back into the
//! externally visible session state.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::tasks::TaskItem;
use super::{ApprovalRequest, SessionState};
use crate::llm::{ChatMessage, Role, ToolCallRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    UserMsg,
    AssistantMsg,
    ToolCall,
    ToolResult,
    ApprovalRequested,
    ApprovalResolved,
    TaskChanged,
    RunProgress,
    RunFinished,
    StudyProgress,
    StateChanged,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    /// Unix milliseconds.
    pub timestamp: u64,
    pub kind: EventKind,
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FoldError {
    #[error("event {seq}: expected seq {expected}")]
    OutOfOrder { seq: u64, expected: u64 },
    #[error("event {seq}: malformed {kind:?} payload: {reason}")]
    BadPayload { seq: u64, kind: EventKind, reason: String },
    #[error("event {seq}: transition {from:?} -> {to:?} is not allowed")]
    IllegalTransition { seq: u64, from: SessionState, to: SessionState },
}

/// The declared state machine.
pub fn transition_allowed(from: SessionState, to: SessionState) -> bool {
    use SessionState::*;
    if from == to && matches!(from, AwaitingTool) {
        return true;
    }
    match (from, to) {
        (Closed, _) => false,
        (_, Closed) => true,
        (Idle | AwaitingUser, AwaitingModel) => true,
        (Idle | AwaitingUser, AwaitingTool) => true,
        (AwaitingModel, AwaitingTool | AwaitingUser | Failed) => true,
        (AwaitingTool, AwaitingModel | AwaitingApproval | Failed) => true,
        (AwaitingApproval, AwaitingTool | Failed) => true,
        (Idle | AwaitingUser, Failed) => true,
        _ => false,
    }
}

/// Session state as seen from outside: everything a client can observe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub state: SessionState,
    pub transcript: Vec<ChatMessage>,
    pub tasks: Vec<TaskItem>,
    pub pending_approvals: Vec<ApprovalRequest>,
    pub resolved_approvals: BTreeSet<String>,
    pub approvals_requested: usize,
    pub runs_finished: usize,
    pub last_seq: u64,
}

impl SessionView {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            state: SessionState::Idle,
            transcript: Vec::new(),
            tasks: Vec::new(),
            pending_approvals: Vec::new(),
            resolved_approvals: BTreeSet::new(),
            approvals_requested: 0,
            runs_finished: 0,
            last_seq: 0,
        }
    }

    /// Calls of the latest assistant message that have no tool result yet,
    /// in request order.
    pub fn outstanding_calls(&self) -> Vec<ToolCallRequest> {
        let Some(pos) = self.transcript.iter().rposition(|m| m.role == Role::Assistant) else {
            return Vec::new();
        };
        let answered: BTreeSet<&str> = self.transcript[pos + 1..]
            .iter()
            .filter_map(|m| m.tool_call_id.as_deref())
            .collect();
        self.transcript[pos]
            .tool_calls
            .iter()
            .filter(|c| !answered.contains(c.id.as_str()))
            .cloned()
            .collect()
    }

    fn message(rec: &EventRecord) -> Result<ChatMessage, FoldError> {
        let m: ChatMessage = field(rec, "message")?;
        m.validate().map_err(|reason| bad(rec, reason))?;
        Ok(m)
    }

    fn enter(&mut self, rec: &EventRecord, to: SessionState) -> Result<(), FoldError> {
        if !transition_allowed(self.state, to) && self.state != to {
            return Err(FoldError::IllegalTransition {
                seq: rec.seq,
                from: self.state,
                to,
            });
        }
        self.state = to;
        Ok(())
    }

    /// Applies one record. A rejected record leaves the view unchanged.
    pub fn apply(&mut self, rec: &EventRecord) -> Result<(), FoldError> {
        if rec.seq != self.last_seq + 1 {
            return Err(FoldError::OutOfOrder {
                seq: rec.seq,
                expected: self.last_seq + 1,
            });
        }
        let mut next = self.clone();
        next.apply_inner(rec)?;
        next.last_seq = rec.seq;
        *self = next;
        Ok(())
    }

    fn apply_inner(&mut self, rec: &EventRecord) -> Result<(), FoldError> {
        match rec.kind {
            EventKind::UserMsg => {
                let m = Self::message(rec)?;
                if m.role != Role::User {
                    return Err(bad(rec, "user_msg must carry a user message"));
                }
                self.enter(rec, SessionState::AwaitingModel)?;
                self.transcript.push(m);
            }
            EventKind::AssistantMsg => {
                let m = Self::message(rec)?;
                if m.role != Role::Assistant {
                    return Err(bad(rec, "assistant_msg must carry an assistant message"));
                }
                let to = if m.tool_calls.is_empty() {
                    SessionState::AwaitingUser
                } else {
                    SessionState::AwaitingTool
                };
                if self.state != SessionState::AwaitingModel {
                    return Err(FoldError::IllegalTransition {
                        seq: rec.seq,
                        from: self.state,
                        to,
                    });
                }
                self.enter(rec, to)?;
                self.transcript.push(m);
            }
            EventKind::ToolResult => {
                let m = Self::message(rec)?;
                let id = m.tool_call_id.clone().unwrap_or_default();
                if m.role != Role::Tool || !self.outstanding_calls().iter().any(|c| c.id == id) {
                    return Err(bad(rec, format!("no outstanding call '{id}'")));
                }
                if self.state != SessionState::AwaitingTool {
                    return Err(FoldError::IllegalTransition {
                        seq: rec.seq,
                        from: self.state,
                        to: SessionState::AwaitingModel,
                    });
                }
                self.transcript.push(m);
                let to = if self.outstanding_calls().is_empty() {
                    SessionState::AwaitingModel
                } else {
                    SessionState::AwaitingTool
                };
                self.enter(rec, to)?;
            }
            EventKind::ToolCall => {
                self.enter(rec, SessionState::AwaitingTool)?;
            }
            EventKind::ApprovalRequested => {
                let a: ApprovalRequest = field(rec, "approval")?;
                if self.state != SessionState::AwaitingTool {
                    return Err(FoldError::IllegalTransition {
                        seq: rec.seq,
                        from: self.state,
                        to: SessionState::AwaitingApproval,
                    });
                }
                self.enter(rec, SessionState::AwaitingApproval)?;
                self.approvals_requested += 1;
                self.pending_approvals.push(a);
            }
            EventKind::ApprovalResolved => {
                let id: String = field(rec, "approval_id")?;
                let Some(pos) = self.pending_approvals.iter().position(|a| a.id == id) else {
                    return Err(bad(rec, format!("no pending approval '{id}'")));
                };
                self.enter(rec, SessionState::AwaitingTool)?;
                self.pending_approvals.remove(pos);
                self.resolved_approvals.insert(id);
            }
            EventKind::TaskChanged => {
                let t: TaskItem = field(rec, "task")?;
                match self.tasks.iter_mut().find(|x| x.id == t.id) {
                    Some(slot) => *slot = t,
                    None => self.tasks.push(t),
                }
            }
            EventKind::StateChanged => {
                let to: SessionState = field(rec, "to")?;
                self.enter(rec, to)?;
            }
            EventKind::RunFinished => self.runs_finished += 1,
            EventKind::RunProgress | EventKind::StudyProgress | EventKind::Error => {}
        }
        Ok(())
    }
}

fn bad(rec: &EventRecord, reason: impl Into<String>) -> FoldError {
    FoldError::BadPayload {
        seq: rec.seq,
        kind: rec.kind,
        reason: reason.into(),
    }
}

fn field<T: serde::de::DeserializeOwned>(rec: &EventRecord, key: &str) -> Result<T, FoldError> {
    let v = rec.payload.get(key).ok_or_else(|| bad(rec, format!("missing '{key}'")))?;
    serde_json::from_value(v.clone()).map_err(|e| bad(rec, e.to_string()))
}

/// Folds a whole log from a fresh view.
pub fn fold(id: &str, records: &[EventRecord]) -> Result<SessionView, (SessionView, FoldError)> {
    let mut view = SessionView::new(id);
    for r in records {
        if let Err(e) = view.apply(r) {
            return Err((view, e));
        }
    }
    Ok(view)
}

/// Removes `timestamp` and every `*_at` key so logs from two runs compare
/// equal.
pub fn strip_timestamps(v: &Value) -> Value {
    match v {
        Value::Object(map) => Value::Object(
            map.iter()
                .filter(|(k, _)| k.as_str() != "timestamp" && !k.ends_with("_at"))
                .map(|(k, v)| (k.clone(), strip_timestamps(v)))
                .collect(),
        ),
        Value::Array(items) => Value::Array(items.iter().map(strip_timestamps).collect()),
        other => other.clone(),
    }
}
