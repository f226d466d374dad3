use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_request, ChatMessage, ChatProvider, LlmError, Role};
use crate::toolkit::ToolSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptStep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_contains: Option<String>,
    pub reply: ChatMessage,
}

pub fn load_script(path: &Path) -> Result<Vec<ScriptStep>, LlmError> {
    let text = std::fs::read_to_string(path).map_err(|e| LlmError::InvalidScript(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| LlmError::InvalidScript(format!("{}: {e}", path.display())))
}

/// Replays a fixed list of assistant replies in order.
#[derive(Debug, Clone)]
pub struct ScriptedProvider {
    steps: Vec<ScriptStep>,
    next: usize,
}

impl ScriptedProvider {
    pub fn new(steps: Vec<ScriptStep>) -> Result<Self, LlmError> {
        for (i, s) in steps.iter().enumerate() {
            if s.reply.role != Role::Assistant {
                return Err(LlmError::InvalidScript(format!("step {i}: reply must be an assistant message")));
            }
            s.reply.validate().map_err(|e| LlmError::InvalidScript(format!("step {i}: {e}")))?;
        }
        Ok(Self { steps, next: 0 })
    }

    pub fn remaining(&self) -> usize {
        self.steps.len() - self.next
    }

    pub fn position(&self) -> usize {
        self.next
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete(&mut self, messages: &[ChatMessage], _tools: &[ToolSpec]) -> Result<ChatMessage, LlmError> {
        check_request(messages)?;
        let Some(step) = self.steps.get(self.next) else {
            return Err(LlmError::ScriptExhausted { steps: self.steps.len() });
        };
        if let Some(expected) = &step.expected_contains {
            let latest = messages
                .iter()
                .rev()
                .find(|m| matches!(m.role, Role::User | Role::Tool))
                .map(|m| m.text.as_str())
                .unwrap_or_default();
            if !latest.contains(expected.as_str()) {
                return Err(LlmError::ScriptMismatch {
                    step: self.next,
                    expected: expected.clone(),
                });
            }
        }
        self.next += 1;
        Ok(step.reply.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ToolCallRequest;

    fn sys() -> Vec<ChatMessage> {
        vec![ChatMessage::system("s"), ChatMessage::user("hi")]
    }

    #[test]
    fn replay_and_exhaustion() {
        let mut p = ScriptedProvider::new(vec![ScriptStep {
            expected_contains: None,
            reply: ChatMessage::assistant("done"),
        }])
        .unwrap();
        assert_eq!(p.complete(&sys(), &[]).unwrap().text, "done");
        assert_eq!(p.complete(&sys(), &[]), Err(LlmError::ScriptExhausted { steps: 1 }));
    }

    #[test]
    fn guard_names_step() {
        let steps = vec![
            ScriptStep {
                expected_contains: None,
                reply: ChatMessage::assistant_calls("", vec![ToolCallRequest::new("c1", "read_file", serde_json::json!({"path": "x"}))]),
            },
            ScriptStep {
                expected_contains: Some("FATAL".into()),
                reply: ChatMessage::assistant("fix"),
            },
        ];
        let mut p = ScriptedProvider::new(steps).unwrap();
        let mut msgs = sys();
        msgs.push(p.complete(&msgs, &[]).unwrap());
        msgs.push(ChatMessage::tool("c1", "all good"));
        assert_eq!(
            p.complete(&msgs, &[]),
            Err(LlmError::ScriptMismatch { step: 1, expected: "FATAL".into() })
        );
        msgs.push(ChatMessage::tool("c1", "--> FOAM FATAL ERROR"));
        assert_eq!(p.complete(&msgs, &[]).unwrap().text, "fix");
    }

    #[test]
    fn rejects_non_assistant_replies_and_bad_requests() {
        let bad = vec![ScriptStep {
            expected_contains: None,
            reply: ChatMessage::user("x"),
        }];
        assert!(ScriptedProvider::new(bad).is_err());
        let mut p = ScriptedProvider::new(vec![]).unwrap();
        assert!(matches!(p.complete(&[ChatMessage::user("x")], &[]), Err(LlmError::InvalidRequest(_))));
    }
}
