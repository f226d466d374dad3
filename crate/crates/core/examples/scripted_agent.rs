//! A scripted model drives the tool loop: one safe read, then a write that
//! waits for approval.

use flamepilot::llm::{ChatMessage, ScriptStep, ScriptedProvider, ToolCallRequest};
use flamepilot::orchestrator::{Session, SessionConfig, SessionState, ToolContext, Verdict};
use flamepilot::toolkit::SandboxPolicy;
use serde_json::json;

fn step(reply: ChatMessage) -> ScriptStep {
    ScriptStep { expected_contains: None, reply }
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("README"), "case notes: use kEpsilon\n").unwrap();
    let ctx = ToolContext::new(SandboxPolicy::new(tmp.path()).unwrap());

    let script = vec![
        step(ChatMessage::assistant_calls("", vec![ToolCallRequest::new("c1", "read_file", json!({"path": "README"}))])),
        step(ChatMessage::assistant_calls(
            "writing a summary",
            vec![ToolCallRequest::new("c2", "write_file", json!({"path": "summary.txt", "content": "turbulence: kEpsilon\n"}))],
        )),
        step(ChatMessage::assistant("summary written")),
    ];
    let provider = ScriptedProvider::new(script).unwrap();
    let mut session = Session::new("demo", Box::new(provider), ctx, SessionConfig::default());

    for e in session.run_turn("summarise the README").unwrap() {
        println!("{:>3} {:?}", e.seq, e.kind);
    }
    assert_eq!(session.state(), SessionState::AwaitingApproval);
    let pending = session.view().pending_approvals[0].clone();
    println!("approving {} {}", pending.tool_call.tool_name, pending.tool_call.arguments);
    for e in session.resolve_approval(&pending.id, Verdict::Approve, "").unwrap() {
        println!("{:>3} {:?}", e.seq, e.kind);
    }
    println!("summary.txt: {}", std::fs::read_to_string(tmp.path().join("summary.txt")).unwrap().trim());
}
