use std::time::Duration;

use rand::Rng;
use serde_json::{json, Value};

use super::{check_request, trim_context, ChatMessage, ChatProvider, LlmError, ProviderConfig, Role, ToolCallRequest};
use crate::toolkit::ToolSpec;

const BASE_BACKOFF: Duration = Duration::from_secs(1);
const MAX_BACKOFF: Duration = Duration::from_secs(60);

/// Upper bound of the jittered sleep before retry `attempt` (0-based).
pub fn backoff_ceiling(attempt: u32) -> Duration {
    BASE_BACKOFF.saturating_mul(1u32 << attempt.min(16)).min(MAX_BACKOFF)
}

type Sleeper = Box<dyn Fn(Duration) + Send>;

pub struct RemoteProvider {
    config: ProviderConfig,
    agent: ureq::Agent,
    sleeper: Sleeper,
}

impl std::fmt::Debug for RemoteProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteProvider").field("config", &self.config).finish()
    }
}

impl RemoteProvider {
    pub fn new(config: ProviderConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(config.request_timeout)))
            .build()
            .new_agent();
        Ok(Self {
            config,
            agent,
            sleeper: Box::new(std::thread::sleep),
        })
    }

    /// Replaces the sleep used between retries.
    pub fn with_sleeper(mut self, sleeper: impl Fn(Duration) + Send + 'static) -> Self {
        self.sleeper = Box::new(sleeper);
        self
    }

    fn request_body(&self, messages: &[ChatMessage], tools: &[ToolSpec]) -> Value {
        let msgs: Vec<Value> = messages.iter().map(wire_message).collect();
        let mut body = json!({"model": self.config.model_id, "messages": msgs});
        if !tools.is_empty() {
            body["tools"] = tools
                .iter()
                .map(|t| {
                    json!({"type": "function", "function": {
                        "name": t.name, "description": t.description, "parameters": t.parameters_schema()
                    }})
                })
                .collect();
        }
        body
    }

    fn attempt(&self, body: &Value) -> Result<ChatMessage, LlmError> {
        let endpoint = self.config.endpoint.as_deref().unwrap_or_default();
        let mut req = self.agent.post(endpoint).header("Content-Type", "application/json");
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send(body.to_string()).map_err(|e| LlmError::Provider {
            retriable: true,
            status: None,
            detail: e.to_string(),
        })?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().unwrap_or_default();
        if status == 429 || status >= 500 {
            return Err(LlmError::Provider {
                retriable: true,
                status: Some(status),
                detail: text,
            });
        }
        if status >= 400 {
            return Err(LlmError::Provider {
                retriable: false,
                status: Some(status),
                detail: text,
            });
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| LlmError::Provider {
            retriable: false,
            status: Some(status),
            detail: format!("undecodable response: {e}"),
        })?;
        parse_reply(&v).ok_or_else(|| LlmError::Provider {
            retriable: false,
            status: Some(status),
            detail: "response has no choices[0].message".into(),
        })
    }
}

fn wire_message(m: &ChatMessage) -> Value {
    let role = match m.role {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
        Role::Tool => "tool",
    };
    let mut v = json!({"role": role, "content": m.text});
    if !m.tool_calls.is_empty() {
        v["tool_calls"] = m
            .tool_calls
            .iter()
            .map(|c| json!({"id": c.id, "type": "function", "function": {"name": c.tool_name, "arguments": c.arguments.to_string()}}))
            .collect();
    }
    if let Some(id) = &m.tool_call_id {
        v["tool_call_id"] = json!(id);
    }
    v
}

fn parse_reply(v: &Value) -> Option<ChatMessage> {
    let msg = v.get("choices")?.get(0)?.get("message")?;
    let text = msg.get("content").and_then(Value::as_str).unwrap_or_default();
    let calls = msg
        .get("tool_calls")
        .and_then(Value::as_array)
        .map(|calls| {
            calls
                .iter()
                .enumerate()
                .filter_map(|(i, c)| {
                    let f = c.get("function")?;
                    let name = f.get("name")?.as_str()?;
                    let args = match f.get("arguments") {
                        Some(Value::String(s)) => serde_json::from_str(s).unwrap_or_else(|_| json!({"_raw": s})),
                        Some(other) => other.clone(),
                        None => json!({}),
                    };
                    let id = c.get("id").and_then(Value::as_str).map(String::from).unwrap_or_else(|| format!("call_{i}"));
                    Some(ToolCallRequest::new(id, name, args))
                })
                .collect()
        })
        .unwrap_or_default();
    Some(ChatMessage::assistant_calls(text, calls))
}

impl ChatProvider for RemoteProvider {
    fn complete(&mut self, messages: &[ChatMessage], tools: &[ToolSpec]) -> Result<ChatMessage, LlmError> {
        check_request(messages)?;
        let trimmed = trim_context(messages, self.config.context_budget)?;
        let body = self.request_body(&trimmed, tools);
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Err(LlmError::Provider { retriable: true, .. }) if attempt < self.config.max_retries => {
                    let ceiling = backoff_ceiling(attempt).as_millis() as u64;
                    let wait = rand::rng().random_range(0..=ceiling);
                    (self.sleeper)(Duration::from_millis(wait));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}
