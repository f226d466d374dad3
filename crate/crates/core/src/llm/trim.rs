use super::{ChatMessage, LlmError, Role};

/// ceil(characters / 4) over text and tool-call payloads.
pub fn estimate_message(m: &ChatMessage) -> usize {
    let mut chars = m.text.chars().count();
    for c in &m.tool_calls {
        chars += c.id.chars().count() + c.tool_name.chars().count() + c.arguments.to_string().chars().count();
    }
    chars.div_ceil(4)
}

pub fn estimate_tokens(messages: &[ChatMessage]) -> usize {
    messages.iter().map(estimate_message).sum()
}

pub fn placeholder_text(n: usize) -> String {
    format!("[elided {n} earlier messages]")
}

/// Keeps the system message and the newest messages that fit; older ones are
/// replaced by one placeholder. A retained suffix never starts with a tool
/// result whose call was elided.
pub fn trim_context(messages: &[ChatMessage], budget: usize) -> Result<Vec<ChatMessage>, LlmError> {
    if budget == 0 {
        return Err(LlmError::BudgetTooSmall { needed: 0, budget });
    }
    if estimate_tokens(messages) <= budget {
        return Ok(messages.to_vec());
    }
    let (head, rest): (&[ChatMessage], &[ChatMessage]) = match messages.first() {
        Some(m) if m.role == Role::System => (&messages[..1], &messages[1..]),
        _ => (&[], messages),
    };
    let head_size = estimate_tokens(head);
    if head_size > budget {
        return Err(LlmError::BudgetTooSmall { needed: head_size, budget });
    }
    let mut suffix_sizes = vec![0usize; rest.len() + 1];
    for i in (0..rest.len()).rev() {
        suffix_sizes[i] = suffix_sizes[i + 1] + estimate_message(&rest[i]);
    }
    for cut in 1..=rest.len() {
        if cut < rest.len() && rest[cut].role == Role::Tool {
            continue;
        }
        let placeholder = ChatMessage::user(placeholder_text(cut));
        if head_size + estimate_message(&placeholder) + suffix_sizes[cut] <= budget {
            let mut out = head.to_vec();
            out.push(placeholder);
            out.extend_from_slice(&rest[cut..]);
            return Ok(out);
        }
    }
    Err(LlmError::BudgetTooSmall {
        needed: head_size + estimate_message(&ChatMessage::user(placeholder_text(rest.len()))),
        budget,
    })
}
