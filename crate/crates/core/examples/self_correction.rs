//! A case with a zero time step fails; the session feeds the fatal excerpt
//! back to the model, which fixes `deltaT` and the relaunch runs clean.

#[path = "support/mod.rs"]
mod support;

use flamepilot::llm::{ChatMessage, ScriptStep, ScriptedProvider, ToolCallRequest};
use flamepilot::orchestrator::{EventKind, Session, SessionConfig, ToolContext};
use flamepilot::runmgr::{run_to_completion, stub};
use serde_json::json;

fn main() {
    stub::dispatch_if_requested();
    let sandbox = support::Sandbox::with_stub();
    let case = sandbox.copy_in(&support::fixtures().join("cases/jhc-mild"), "jhc");

    let first = run_to_completion(&sandbox.policy, &case, "stubFoam", "first", 20, |_| {}).unwrap();
    println!("first launch: {} (exit {:?})", first.diagnostic.kind, first.exit_code);
    println!("{}", first.diagnostic.excerpt.lines().take(4).collect::<Vec<_>>().join("\n"));

    let fix = ToolCallRequest::new(
        "fix",
        "edit_dict",
        json!({"case": "jhc", "dict_file": "system/controlDict", "key_path": "deltaT", "value": "0.001"}),
    );
    let script = vec![
        ScriptStep { expected_contains: Some("deltaT".into()), reply: ChatMessage::assistant_calls("deltaT is zero", vec![fix]) },
        ScriptStep { expected_contains: None, reply: ChatMessage::assistant("fixed deltaT, relaunching") },
        ScriptStep { expected_contains: Some("clean_exit".into()), reply: ChatMessage::assistant("the case now runs") },
    ];
    let mut ctx = ToolContext::new(sandbox.policy.clone());
    ctx.tail_lines = 20;
    let config = SessionConfig { auto_approve: true, ..Default::default() };
    let mut session = Session::new("fix", Box::new(ScriptedProvider::new(script).unwrap()), ctx, config);
    session.self_correct(&first).unwrap();

    for e in session.log().iter().filter(|e| e.kind == EventKind::RunFinished) {
        println!("attempt {}: {}", e.payload["attempt"], e.payload["run"]["diagnostic"]["kind"]);
    }
    println!("state: {:?}", session.state());
}
