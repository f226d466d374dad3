//! Start the gateway on an ephemeral loopback port, create a session, send
//! one message and read the event stream back over HTTP.

use std::sync::Arc;

use flamepilot::gateway::{bind, generate_token, serve_on, Gateway, SessionFactory, SessionParts, SessionStore};
use flamepilot::llm::{ChatMessage, ScriptStep, ScriptedProvider, ToolCallRequest};
use flamepilot::orchestrator::{SessionConfig, ToolContext};
use flamepilot::toolkit::SandboxPolicy;
use serde_json::json;

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let work = tmp.path().join("work");
    std::fs::create_dir(&work).unwrap();
    std::fs::write(work.join("hello.txt"), "hello from the sandbox\n").unwrap();
    let ctx = ToolContext::new(SandboxPolicy::new(&work).unwrap());

    let factory = move |_id: &str| -> Result<SessionParts, String> {
        let steps = vec![
            ScriptStep {
                expected_contains: None,
                reply: ChatMessage::assistant_calls("", vec![ToolCallRequest::new("c1", "read_file", json!({"path": "hello.txt"}))]),
            },
            ScriptStep { expected_contains: None, reply: ChatMessage::assistant("the file says hello") },
        ];
        let provider = ScriptedProvider::new(steps).map_err(|e| e.to_string())?;
        Ok((Box::new(provider), ctx.clone(), SessionConfig::default()))
    };
    let factory: Arc<dyn SessionFactory> = Arc::new(factory);
    let store = Arc::new(SessionStore::open(tmp.path().join("sessions")).unwrap());
    let token = generate_token();
    let gw = Gateway::new(store, token.clone(), factory);

    let rt = tokio::runtime::Runtime::new().unwrap();
    let listener = rt.block_on(bind("127.0.0.1:0".parse().unwrap(), false)).unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    rt.spawn(serve_on(gw, listener));
    println!("gateway on {base}");

    let agent = ureq::Agent::config_builder().http_status_as_error(false).build().new_agent();
    let auth = format!("Bearer {token}");
    let post = |path: &str, body: serde_json::Value| {
        let mut r = agent
            .post(format!("{base}{path}"))
            .header("Authorization", &auth)
            .header("Content-Type", "application/json")
            .send(body.to_string())
            .unwrap();
        (r.status().as_u16(), r.body_mut().read_to_string().unwrap())
    };
    println!("create: {:?}", post("/api/sessions", json!({"id": "demo"})));
    println!("input:  {:?}", post("/api/sessions/demo/input", json!({"text": "what does hello.txt say?"})).0);

    let mut r = agent
        .get(format!("{base}/api/sessions/demo/events?from=0&follow=false"))
        .header("Authorization", &auth)
        .call()
        .unwrap();
    let stream = r.body_mut().read_to_string().unwrap();
    for line in stream.lines().filter(|l| l.starts_with("event:")) {
        println!("  {line}");
    }
    let unauth = agent.get(format!("{base}/api/sessions")).call().unwrap();
    println!("without token: {}", unauth.status());
}
