//! Chat-completion providers: a remote chat-completions client and a scripted
//! replay provider for deterministic sessions.

mod remote;
mod scripted;
mod trim;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::toolkit::ToolSpec;

pub use remote::{backoff_ceiling, RemoteProvider};
pub use scripted::{load_script, ScriptStep, ScriptedProvider};
pub use trim::{estimate_message, estimate_tokens, placeholder_text, trim_context};

pub const DEFAULT_API_KEY_ENV: &str = "FLAMEPILOT_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCallRequest {
    pub id: String,
    pub tool_name: String,
    #[serde(default = "empty_object")]
    pub arguments: Value,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

impl ToolCallRequest {
    pub fn new(id: impl Into<String>, tool_name: impl Into<String>, arguments: Value) -> Self {
        Self {
            id: id.into(),
            tool_name: tool_name.into(),
            arguments,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    #[serde(default)]
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCallRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
}

impl ChatMessage {
    fn plain(role: Role, text: impl Into<String>) -> Self {
        Self {
            role,
            text: text.into(),
            tool_calls: Vec::new(),
            tool_call_id: None,
        }
    }

    pub fn system(text: impl Into<String>) -> Self {
        Self::plain(Role::System, text)
    }

    pub fn user(text: impl Into<String>) -> Self {
        Self::plain(Role::User, text)
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self::plain(Role::Assistant, text)
    }

    pub fn assistant_calls(text: impl Into<String>, calls: Vec<ToolCallRequest>) -> Self {
        Self {
            tool_calls: calls,
            ..Self::plain(Role::Assistant, text)
        }
    }

    pub fn tool(call_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            tool_call_id: Some(call_id.into()),
            ..Self::plain(Role::Tool, text)
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.role == Role::Tool && self.tool_call_id.is_none() {
            return Err("tool message without tool_call_id".into());
        }
        if self.role != Role::Tool && self.tool_call_id.is_some() {
            return Err("tool_call_id on a non-tool message".into());
        }
        if self.role != Role::Assistant && !self.tool_calls.is_empty() {
            return Err("tool_calls on a non-assistant message".into());
        }
        let mut ids = std::collections::BTreeSet::new();
        for c in &self.tool_calls {
            if !ids.insert(c.id.as_str()) {
                return Err(format!("duplicate tool call id '{}'", c.id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Remote,
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model_id: String,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_budget")]
    pub context_budget: usize,
    /// Per-request timeout in seconds.
    #[serde(default = "default_timeout")]
    pub request_timeout: u64,
}

fn default_key_env() -> String {
    DEFAULT_API_KEY_ENV.into()
}
fn default_retries() -> u32 {
    3
}
fn default_budget() -> usize {
    120_000
}
fn default_timeout() -> u64 {
    300
}

impl ProviderConfig {
    pub fn scripted() -> Self {
        Self {
            kind: ProviderKind::Scripted,
            endpoint: None,
            model_id: "scripted".into(),
            api_key_env: default_key_env(),
            max_retries: default_retries(),
            context_budget: default_budget(),
            request_timeout: default_timeout(),
        }
    }

    pub fn remote(endpoint: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            kind: ProviderKind::Remote,
            endpoint: Some(endpoint.into()),
            model_id: model_id.into(),
            ..Self::scripted()
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.context_budget == 0 {
            return Err(LlmError::InvalidConfig("context_budget must be positive".into()));
        }
        if self.kind == ProviderKind::Remote && self.endpoint.as_deref().is_none_or(str::is_empty) {
            return Err(LlmError::InvalidConfig("remote provider needs an endpoint".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize)]
pub enum LlmError {
    #[error("provider error (status {status:?}, retriable {retriable}): {detail}")]
    Provider {
        retriable: bool,
        status: Option<u16>,
        detail: String,
    },
    #[error("script exhausted after {steps} steps")]
    ScriptExhausted { steps: usize },
    #[error("script step {step}: latest message does not contain {expected:?}")]
    ScriptMismatch { step: usize, expected: String },
    #[error("context budget {budget} is smaller than the system message ({needed})")]
    BudgetTooSmall { needed: usize, budget: usize },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid provider config: {0}")]
    InvalidConfig(String),
    #[error("invalid script: {0}")]
    InvalidScript(String),
}

/// One completion per call; implementations are driven by a single session.
pub trait ChatProvider: Send {
    fn complete(&mut self, messages: &[ChatMessage], tools: &[ToolSpec]) -> Result<ChatMessage, LlmError>;
}

pub(crate) fn check_request(messages: &[ChatMessage]) -> Result<(), LlmError> {
    match messages.first() {
        None => Err(LlmError::InvalidRequest("no messages".into())),
        Some(m) if m.role != Role::System => Err(LlmError::InvalidRequest("first message must be the system message".into())),
        _ => Ok(()),
    }
}

/// Builds the provider named by `config`. Scripted providers need the
/// script steps.
pub fn build_provider(config: &ProviderConfig, script: Option<Vec<ScriptStep>>) -> Result<Box<dyn ChatProvider>, LlmError> {
    config.validate()?;
    match config.kind {
        ProviderKind::Scripted => {
            let steps = script.ok_or_else(|| LlmError::InvalidConfig("scripted provider needs a script".into()))?;
            Ok(Box::new(ScriptedProvider::new(steps)?))
        }
        ProviderKind::Remote => Ok(Box::new(RemoteProvider::new(config.clone())?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn message_invariants() {
        assert!(ChatMessage::tool("c1", "x").validate().is_ok());
        let mut m = ChatMessage::user("x");
        m.tool_calls.push(ToolCallRequest::new("a", "read_file", empty_object()));
        assert!(m.validate().is_err());
        let dup = ChatMessage::assistant_calls(
            "",
            vec![
                ToolCallRequest::new("a", "read_file", empty_object()),
                ToolCallRequest::new("a", "list_dir", empty_object()),
            ],
        );
        assert!(dup.validate().is_err());
        let mut t = ChatMessage::tool("c", "x");
        t.tool_call_id = None;
        assert!(t.validate().is_err());
    }

    #[test]
    fn config_defaults_from_json() {
        let c: ProviderConfig = serde_json::from_str(r#"{"kind":"remote","endpoint":"http://x","model_id":"m"}"#).unwrap();
        assert_eq!(c.max_retries, 3);
        assert_eq!(c.api_key_env, "FLAMEPILOT_API_KEY");
        assert!(c.validate().is_ok());
        let mut bad = c.clone();
        bad.context_budget = 0;
        assert!(bad.validate().is_err());
    }
}
