mod common;

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::sync::{Arc, Mutex};

use common::{call, expecting, say, Workspace};
use flamepilot::gateway::{Gateway, SessionFactory, SessionParts, SessionStore};
use flamepilot::llm::{ScriptStep, ScriptedProvider};
use flamepilot::orchestrator::{EventKind, EventRecord, SessionConfig};
use serde_json::{json, Value};

#[test]
fn replay_after_truncation_at_every_boundary() {
    common::checks::durability().unwrap();
}

struct Server {
    base: String,
    token: String,
    ws: Workspace,
    sessions: std::path::PathBuf,
}

type Scripts = Arc<Mutex<HashMap<String, (Vec<ScriptStep>, bool)>>>;

fn start(scripts: Scripts) -> Server {
    let ws = Workspace::new();
    let sessions = ws.tmp.path().join("sessions");
    let store = Arc::new(SessionStore::open(&sessions).unwrap());
    let ctx = ws.context();
    let factory = move |id: &str| -> Result<SessionParts, String> {
        let (steps, auto) = scripts.lock().unwrap().get(id).cloned().unwrap_or_default();
        let provider = ScriptedProvider::new(steps).map_err(|e| e.to_string())?;
        let config = SessionConfig { auto_approve: auto, ..Default::default() };
        Ok((Box::new(provider), ctx.clone(), config))
    };
    let factory: Arc<dyn SessionFactory> = Arc::new(factory);
    let gw = Gateway::new(store, "secret-token", factory);
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = flamepilot::gateway::bind("127.0.0.1:0".parse().unwrap(), false).await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            flamepilot::gateway::serve_on(gw, listener).await.unwrap();
        });
    });
    let addr = rx.recv().unwrap();
    Server { base: format!("http://{addr}"), token: "secret-token".into(), ws, sessions }
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().new_agent()
}

impl Server {
    fn get(&self, path: &str) -> (u16, Value) {
        let mut r = agent().get(format!("{}{path}", self.base)).header("Authorization", format!("Bearer {}", self.token)).call().unwrap();
        let text = r.body_mut().read_to_string().unwrap();
        (r.status().as_u16(), serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }

    fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let mut r = agent()
            .post(format!("{}{path}", self.base))
            .header("Authorization", format!("Bearer {}", self.token))
            .header("Content-Type", "application/json")
            .send(body.to_string())
            .unwrap();
        let text = r.body_mut().read_to_string().unwrap();
        (r.status().as_u16(), serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }

    fn events(&self, id: &str, from: u64) -> Vec<EventRecord> {
        let (status, body) = self.get(&format!("/api/sessions/{id}/events?from={from}&follow=false"));
        assert_eq!(status, 200);
        parse_sse(body.as_str().unwrap())
    }
}

fn parse_sse(text: &str) -> Vec<EventRecord> {
    text.lines()
        .filter_map(|l| l.strip_prefix("data: ").or_else(|| l.strip_prefix("data:")))
        .map(|d| serde_json::from_str(d).unwrap())
        .collect()
}

fn scripts(entries: Vec<(&str, Vec<ScriptStep>, bool)>) -> Scripts {
    Arc::new(Mutex::new(entries.into_iter().map(|(k, v, a)| (k.to_string(), (v, a))).collect()))
}

#[test]
fn auth_and_not_found() {
    let srv = start(scripts(vec![]));
    let r = agent().get(format!("{}/api/sessions", srv.base)).call().unwrap();
    assert_eq!(r.status().as_u16(), 401);
    let r = agent().get(format!("{}/api/sessions", srv.base)).header("Authorization", "Bearer wrong").call().unwrap();
    assert_eq!(r.status().as_u16(), 401);
    assert_eq!(srv.get("/api/sessions").0, 200);
    assert_eq!(srv.get("/api/sessions/nope").0, 404);
    assert_eq!(srv.post("/api/sessions/nope/input", json!({"text": "x"})).0, 404);
    assert_eq!(srv.get("/api/sessions/nope/events").0, 404);
}

#[test]
fn scripted_turn_streams_the_full_log() {
    let srv = start(scripts(vec![(
        "s1",
        vec![call("c1", "list_dir", json!({"path": "."})), say("done")],
        false,
    )]));
    assert_eq!(srv.post("/api/sessions", json!({"id": "s1"})).0, 201);
    assert_eq!(srv.post("/api/sessions", json!({"id": "s1"})).0, 409);
    let (status, body) = srv.post("/api/sessions/s1/input", json!({"text": "look"}));
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["state"], "awaiting_user");
    let events = srv.events("s1", 1);
    let kinds: Vec<EventKind> = events.iter().map(|e| e.kind).collect();
    assert_eq!(kinds, vec![EventKind::UserMsg, EventKind::AssistantMsg, EventKind::ToolResult, EventKind::AssistantMsg]);
    assert_eq!(events.iter().map(|e| e.seq).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
    assert_eq!(srv.events("s1", 3).len(), 2);
    let (_, view) = srv.get("/api/sessions/s1");
    assert_eq!(view["last_seq"], 4);
    assert_eq!(view["state"], "awaiting_user");
    let (_, list) = srv.get("/api/sessions");
    assert_eq!(list["sessions"][0]["id"], "s1");
    let on_disk = std::fs::read_to_string(srv.sessions.join("s1/events.jsonl")).unwrap();
    assert_eq!(on_disk.lines().count(), 4);
}

#[test]
fn approvals_over_http() {
    let srv = start(scripts(vec![(
        "ap",
        vec![
            call("w", "write_file", json!({"path": "x.txt", "content": "1"})),
            expecting(say("ok, not writing"), "denied by user: wrong case dir"),
        ],
        false,
    )]));
    srv.post("/api/sessions", json!({"id": "ap"}));
    let (status, body) = srv.post("/api/sessions/ap/input", json!({"text": "write"}));
    assert_eq!(status, 200);
    assert_eq!(body["state"], "awaiting_approval");
    assert_eq!(srv.post("/api/sessions/ap/input", json!({"text": "again"})).0, 409);
    assert_eq!(srv.post("/api/sessions/ap/approvals/approval-7", json!({"verdict": "approve"})).0, 404);
    let (status, body) = srv.post("/api/sessions/ap/approvals/approval-1", json!({"verdict": "deny", "note": "wrong case dir"}));
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["state"], "awaiting_user");
    assert_eq!(srv.post("/api/sessions/ap/approvals/approval-1", json!({"verdict": "approve"})).0, 409);
    assert!(!srv.ws.root().join("x.txt").exists());
}

#[test]
fn live_stream_delivers_new_events() {
    let srv = start(scripts(vec![("live", vec![say("a"), say("b")], false)]));
    srv.post("/api/sessions", json!({"id": "live"}));
    srv.post("/api/sessions/live/input", json!({"text": "one"}));
    let url = format!("{}/api/sessions/live/events?from=1", srv.base);
    let token = srv.token.clone();
    let reader = std::thread::spawn(move || {
        let r = agent().get(url).header("Authorization", format!("Bearer {token}")).call().unwrap();
        let mut lines = BufReader::new(r.into_body().into_reader()).lines();
        let mut got = Vec::new();
        while got.len() < 4 {
            let line = lines.next().unwrap().unwrap();
            if let Some(d) = line.strip_prefix("data: ").or_else(|| line.strip_prefix("data:")) {
                got.push(serde_json::from_str::<EventRecord>(d).unwrap());
            }
        }
        got
    });
    std::thread::sleep(std::time::Duration::from_millis(200));
    srv.post("/api/sessions/live/input", json!({"text": "two"}));
    let got = reader.join().unwrap();
    assert_eq!(got.iter().map(|e| e.seq).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
}

#[test]
fn concurrent_inputs_keep_seq_dense() {
    let n = 24;
    let srv = Arc::new(start(scripts(vec![("busy", (0..n).map(|_| say("ack")).collect(), false)])));
    srv.post("/api/sessions", json!({"id": "busy"}));
    let handles: Vec<_> = (0..n)
        .map(|i| {
            let srv = srv.clone();
            std::thread::spawn(move || srv.post("/api/sessions/busy/input", json!({"text": format!("msg {i}")})).0)
        })
        .collect();
    let codes: Vec<u16> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    assert!(codes.iter().all(|c| *c == 200), "{codes:?}");
    let events = srv.events("busy", 1);
    assert_eq!(events.len(), 2 * n);
    assert_eq!(events.iter().map(|e| e.seq).collect::<Vec<_>>(), (1..=2 * n as u64).collect::<Vec<_>>());
    for pair in events.chunks(2) {
        assert_eq!(pair[0].kind, EventKind::UserMsg);
        assert_eq!(pair[1].kind, EventKind::AssistantMsg);
    }
}

#[test]
fn study_endpoint_writes_a_report() {
    let srv = start(scripts(vec![("st", vec![], false)]));
    srv.ws.case("base", "success");
    srv.post("/api/sessions", json!({"id": "st"}));
    let spec = json!({
        "base_case": "base",
        "dict_file": "0/k",
        "key_path": "boundaryField/fuelInlet/value",
        "values": [0.5, 1.0],
        "run_command": "stubFoam",
        "label": "k-sweep"
    });
    let (status, body) = srv.post("/api/sessions/st/studies", spec.clone());
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["report"], "studies/k-sweep/report.json");
    let (status, report) = srv.get("/api/sessions/st/studies/k-sweep/report");
    assert_eq!(status, 200);
    assert_eq!(report["members"].as_array().unwrap().len(), 2);
    assert_eq!(srv.get("/api/sessions/st/studies/other/report").0, 404);
    assert_eq!(srv.post("/api/sessions/st/studies", spec).0, 400);
    let events = srv.events("st", 1);
    assert!(events.iter().all(|e| matches!(e.kind, EventKind::StudyProgress | EventKind::Error)));
    assert!(events.iter().any(|e| e.kind == EventKind::StudyProgress));
}

#[test]
fn corrupt_log_opens_read_only() {
    let srv = start(scripts(vec![("rc", vec![say("a"), say("b")], false)]));
    srv.post("/api/sessions", json!({"id": "rc"}));
    srv.post("/api/sessions/rc/input", json!({"text": "one"}));
    drop(srv);
    // A second gateway over the same store with a torn final record.
    let srv2 = start(scripts(vec![("rc", vec![say("b")], false)]));
    std::fs::create_dir_all(srv2.sessions.join("rc")).unwrap();
    let good = "{\"seq\":1,\"timestamp\":0,\"kind\":\"user_msg\",\"payload\":{\"message\":{\"role\":\"user\",\"text\":\"one\"}}}\n";
    std::fs::write(srv2.sessions.join("rc/events.jsonl"), format!("{good}{{\"seq\":2,\"ti")).unwrap();
    let (status, view) = srv2.get("/api/sessions/rc");
    assert_eq!(status, 200);
    assert_eq!(view["read_only"], true);
    assert_eq!(view["last_seq"], 1);
    assert_eq!(srv2.post("/api/sessions/rc/input", json!({"text": "two"})).0, 409);
}
