//! HTTP service over the session store. Each session is owned by one actor
//! thread that executes commands in arrival order, so a session has a single
//! writer no matter how many requests arrive at once.

use std::collections::HashMap;
use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::{mpsc, Arc, Mutex};

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{broadcast, oneshot};

use super::store::{valid_session_id, SessionStore, StoreError, StoreSink};
use crate::llm::ChatProvider;
use crate::orchestrator::{
    report_path, EventRecord, OrchestratorError, Session, SessionConfig, SessionView, ToolContext, Verdict,
};
use crate::study::{StudyResult, StudySpec};

pub const DEFAULT_BIND: &str = "127.0.0.1:7878";

/// Everything needed to host one session besides its event log.
pub type SessionParts = (Box<dyn ChatProvider>, ToolContext, SessionConfig);

pub trait SessionFactory: Send + Sync {
    fn parts(&self, id: &str) -> Result<SessionParts, String>;
}

impl<F> SessionFactory for F
where
    F: Fn(&str) -> Result<SessionParts, String> + Send + Sync,
{
    fn parts(&self, id: &str) -> Result<SessionParts, String> {
        self(id)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("refusing to bind non-loopback address {0} without allow_remote")]
    NonLoopback(SocketAddr),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("session setup failed: {0}")]
    Factory(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type Reply<T> = oneshot::Sender<Result<T, OrchestratorError>>;

enum Command {
    Input { text: String, reply: Reply<Vec<EventRecord>> },
    Resolve { approval_id: String, verdict: Verdict, note: String, reply: Reply<Vec<EventRecord>> },
    Study { spec: StudySpec, reply: Reply<(StudyResult, String)> },
}

struct Actor {
    tx: Mutex<mpsc::Sender<Command>>,
    events: broadcast::Sender<EventRecord>,
    snapshot: Arc<Mutex<SessionView>>,
    read_only: bool,
    workdir: std::path::PathBuf,
}

fn actor_loop(mut session: Session, rx: mpsc::Receiver<Command>) {
    while let Ok(cmd) = rx.recv() {
        match cmd {
            Command::Input { text, reply } => {
                let _ = reply.send(session.run_turn(&text));
            }
            Command::Resolve { approval_id, verdict, note, reply } => {
                let _ = reply.send(session.resolve_approval(&approval_id, verdict, &note));
            }
            Command::Study { spec, reply } => {
                let _ = reply.send(session.run_study(&spec));
            }
        }
    }
}

pub struct Gateway {
    store: Arc<SessionStore>,
    token: String,
    factory: Arc<dyn SessionFactory>,
    actors: Mutex<HashMap<String, Arc<Actor>>>,
}

/// A 256-bit hex token from the thread RNG.
pub fn generate_token() -> String {
    use rand::Rng;
    let mut rng = rand::rng();
    (0..32).map(|_| format!("{:02x}", rng.random::<u8>())).collect()
}

impl Gateway {
    pub fn new(store: Arc<SessionStore>, token: impl Into<String>, factory: Arc<dyn SessionFactory>) -> Arc<Self> {
        Arc::new(Self {
            store,
            token: token.into(),
            factory,
            actors: Mutex::new(HashMap::new()),
        })
    }

    pub fn token(&self) -> &str {
        &self.token
    }

    pub fn store(&self) -> &Arc<SessionStore> {
        &self.store
    }

    pub fn create_session(&self, id: &str) -> Result<(), GatewayError> {
        self.store.create_session(id)?;
        self.actor(id)?;
        Ok(())
    }

    /// Returns the running actor for `id`, replaying its log on first use.
    /// A corrupt log yields a read-only actor over the readable prefix.
    fn actor(&self, id: &str) -> Result<Arc<Actor>, GatewayError> {
        let mut actors = self.actors.lock().expect("actor map lock");
        if let Some(a) = actors.get(id) {
            return Ok(a.clone());
        }
        let (replayed, read_only) = match self.store.replay(id) {
            Ok(r) => (r, false),
            Err(StoreError::CorruptLog { seq, reason, partial }) => {
                tracing::warn!(session = id, seq, reason, "event log is corrupt; opening read-only");
                (*partial, true)
            }
            Err(e) => return Err(e.into()),
        };
        let (provider, ctx, config) = self.factory.parts(id).map_err(GatewayError::Factory)?;
        let workdir = ctx.policy.root.clone();
        let (events, _) = broadcast::channel(1024);
        let snapshot = Arc::new(Mutex::new(replayed.view.clone()));
        let sink = {
            let events = events.clone();
            let snapshot = snapshot.clone();
            StoreSink {
                store: self.store.clone(),
                id: id.to_string(),
                then: move |rec: &EventRecord| {
                    if let Ok(mut v) = snapshot.lock() {
                        let _ = v.apply(rec);
                    }
                    let _ = events.send(rec.clone());
                },
            }
        };
        let mut session = Session::resume(replayed.view, replayed.records, provider, ctx, config).with_sink(Box::new(sink));
        session.set_read_only(read_only);
        let (tx, rx) = mpsc::channel();
        std::thread::Builder::new()
            .name(format!("session-{id}"))
            .spawn(move || actor_loop(session, rx))?;
        let actor = Arc::new(Actor {
            tx: Mutex::new(tx),
            events,
            snapshot,
            read_only,
            workdir,
        });
        actors.insert(id.to_string(), actor.clone());
        Ok(actor)
    }

    pub fn router(self: &Arc<Self>) -> Router {
        Router::new()
            .route("/api/sessions", get(list_sessions).post(create_session))
            .route("/api/sessions/{id}", get(get_session))
            .route("/api/sessions/{id}/events", get(stream_events))
            .route("/api/sessions/{id}/input", post(post_input))
            .route("/api/sessions/{id}/approvals/{approval_id}", post(post_approval))
            .route("/api/sessions/{id}/studies", post(post_study))
            .route("/api/sessions/{id}/studies/{label}/report", get(get_report))
            .layer(middleware::from_fn_with_state(self.clone(), require_bearer))
            .with_state(self.clone())
    }
}

/// Binds `addr` (loopback only unless `allow_remote`) and serves until the
/// future is dropped.
pub async fn serve(gateway: Arc<Gateway>, addr: SocketAddr, allow_remote: bool) -> Result<(), GatewayError> {
    let listener = bind(addr, allow_remote).await?;
    serve_on(gateway, listener).await
}

pub async fn bind(addr: SocketAddr, allow_remote: bool) -> Result<tokio::net::TcpListener, GatewayError> {
    if !addr.ip().is_loopback() && !allow_remote {
        return Err(GatewayError::NonLoopback(addr));
    }
    Ok(tokio::net::TcpListener::bind(addr).await?)
}

pub async fn serve_on(gateway: Arc<Gateway>, listener: tokio::net::TcpListener) -> Result<(), GatewayError> {
    axum::serve(listener, gateway.router()).await?;
    Ok(())
}

async fn require_bearer(State(gw): State<Arc<Gateway>>, req: Request, next: Next) -> Response {
    let ok = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .is_some_and(|t| constant_time_eq(t.as_bytes(), gw.token.as_bytes()));
    if !ok {
        return api_error(StatusCode::UNAUTHORIZED, "unauthorized", "missing or invalid bearer token");
    }
    next.run(req).await
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

fn api_error(status: StatusCode, code: &str, message: impl std::fmt::Display) -> Response {
    (status, Json(json!({"error": code, "message": message.to_string()}))).into_response()
}

fn gateway_error(e: GatewayError) -> Response {
    match e {
        GatewayError::Store(StoreError::UnknownSession(id)) => api_error(StatusCode::NOT_FOUND, "not_found", format!("unknown session '{id}'")),
        GatewayError::Store(StoreError::InvalidId(id)) => api_error(StatusCode::BAD_REQUEST, "invalid_id", format!("invalid session id '{id}'")),
        GatewayError::Store(StoreError::SessionExists(id)) => api_error(StatusCode::CONFLICT, "conflict", format!("session '{id}' already exists")),
        other => api_error(StatusCode::INTERNAL_SERVER_ERROR, "internal", other),
    }
}

fn orchestrator_error(e: OrchestratorError) -> Response {
    let (status, code) = match &e {
        OrchestratorError::InvalidState { .. } | OrchestratorError::StaleApproval(_) | OrchestratorError::ReadOnly => {
            (StatusCode::CONFLICT, "conflict")
        }
        OrchestratorError::UnknownApproval(_) => (StatusCode::NOT_FOUND, "not_found"),
        OrchestratorError::Config(_) | OrchestratorError::Task(_) => (StatusCode::BAD_REQUEST, "invalid_request"),
        OrchestratorError::Provider(_) => (StatusCode::BAD_GATEWAY, "provider"),
        OrchestratorError::LoopBudgetExceeded(_) | OrchestratorError::CorrectionExhausted { .. } => {
            (StatusCode::UNPROCESSABLE_ENTITY, "session_failed")
        }
        _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
    };
    api_error(status, code, e)
}

fn lookup(gw: &Gateway, id: &str) -> Result<Arc<Actor>, Response> {
    if !valid_session_id(id) || !gw.store.exists(id) {
        return Err(api_error(StatusCode::NOT_FOUND, "not_found", format!("unknown session '{id}'")));
    }
    gw.actor(id).map_err(gateway_error)
}

async fn submit<T: Send + 'static>(actor: &Actor, make: impl FnOnce(Reply<T>) -> Command) -> Result<T, Response> {
    let (tx, rx) = oneshot::channel();
    let sent = actor.tx.lock().expect("actor queue lock").send(make(tx));
    if sent.is_err() {
        return Err(api_error(StatusCode::INTERNAL_SERVER_ERROR, "internal", "session actor stopped"));
    }
    match rx.await {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(orchestrator_error(e)),
        Err(_) => Err(api_error(StatusCode::INTERNAL_SERVER_ERROR, "internal", "session actor dropped the request")),
    }
}

fn summary(id: &str, view: &SessionView, read_only: bool) -> Value {
    json!({
        "id": id,
        "state": view.state,
        "last_seq": view.last_seq,
        "pending_approvals": view.pending_approvals.len(),
        "read_only": read_only,
    })
}

async fn list_sessions(State(gw): State<Arc<Gateway>>) -> Response {
    let ids = match gw.store.list_sessions() {
        Ok(ids) => ids,
        Err(e) => return gateway_error(e.into()),
    };
    let mut out = Vec::new();
    for id in ids {
        match gw.actor(&id) {
            Ok(a) => out.push(summary(&id, &a.snapshot.lock().expect("snapshot lock"), a.read_only)),
            Err(e) => out.push(json!({"id": id, "error": e.to_string()})),
        }
    }
    Json(json!({"sessions": out})).into_response()
}

#[derive(Deserialize)]
struct CreateBody {
    id: String,
}

async fn create_session(State(gw): State<Arc<Gateway>>, Json(body): Json<CreateBody>) -> Response {
    match gw.create_session(&body.id) {
        Ok(()) => (StatusCode::CREATED, Json(json!({"id": body.id}))).into_response(),
        Err(e) => gateway_error(e),
    }
}

async fn get_session(State(gw): State<Arc<Gateway>>, Path(id): Path<String>) -> Response {
    match lookup(&gw, &id) {
        Ok(a) => {
            let view = a.snapshot.lock().expect("snapshot lock").clone();
            let mut body = serde_json::to_value(&view).unwrap_or(Value::Null);
            body["read_only"] = json!(a.read_only);
            Json(body).into_response()
        }
        Err(r) => r,
    }
}

#[derive(Deserialize)]
struct EventsQuery {
    from: Option<u64>,
    /// When false the stream ends after the records already stored.
    follow: Option<bool>,
}

fn sse_event(rec: &EventRecord) -> Result<Event, Infallible> {
    let kind = serde_json::to_value(rec.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    Ok(Event::default()
        .id(rec.seq.to_string())
        .event(kind)
        .data(serde_json::to_string(rec).unwrap_or_default()))
}

async fn stream_events(
    State(gw): State<Arc<Gateway>>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, Response> {
    let actor = lookup(&gw, &id)?;
    let from = q.from.unwrap_or(1).max(1);
    // Subscribe before reading the log so nothing falls between the two.
    let live = actor.events.subscribe();
    let (records, _) = gw.store.read_records(&id).map_err(|e| gateway_error(e.into()))?;
    let stored: Vec<EventRecord> = records.into_iter().filter(|r| r.seq >= from).collect();
    let next_seq = stored.last().map_or(from, |r| r.seq + 1);
    let head = stream::iter(stored.iter().map(sse_event).collect::<Vec<_>>());
    let tail = stream::unfold((live, next_seq), |(mut rx, next)| async move {
        loop {
            match rx.recv().await {
                Ok(rec) if rec.seq < next => continue,
                Ok(rec) => {
                    let ev = sse_event(&rec);
                    return Some((ev, (rx, rec.seq + 1)));
                }
                Err(broadcast::error::RecvError::Lagged(_)) => {
                    let ev = Ok(Event::default().event("lagged").data(next.to_string()));
                    return Some((ev, (rx, next)));
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    let tail = if q.follow.unwrap_or(true) { tail.boxed() } else { stream::empty().boxed() };
    Ok(Sse::new(head.chain(tail)).keep_alive(KeepAlive::default()))
}

#[derive(Deserialize)]
struct InputBody {
    text: String,
}

async fn post_input(State(gw): State<Arc<Gateway>>, Path(id): Path<String>, Json(body): Json<InputBody>) -> Response {
    let actor = match lookup(&gw, &id) {
        Ok(a) => a,
        Err(r) => return r,
    };
    match submit(&actor, |reply| Command::Input { text: body.text, reply }).await {
        Ok(events) => turn_response(&actor, events),
        Err(r) => r,
    }
}

fn turn_response(actor: &Actor, events: Vec<EventRecord>) -> Response {
    let state = actor.snapshot.lock().expect("snapshot lock").state;
    Json(json!({"state": state, "events": events})).into_response()
}

#[derive(Deserialize)]
struct ApprovalBody {
    verdict: Verdict,
    #[serde(default)]
    note: String,
}

async fn post_approval(
    State(gw): State<Arc<Gateway>>,
    Path((id, approval_id)): Path<(String, String)>,
    Json(body): Json<ApprovalBody>,
) -> Response {
    let actor = match lookup(&gw, &id) {
        Ok(a) => a,
        Err(r) => return r,
    };
    let cmd = |reply| Command::Resolve {
        approval_id,
        verdict: body.verdict,
        note: body.note,
        reply,
    };
    match submit(&actor, cmd).await {
        Ok(events) => turn_response(&actor, events),
        Err(r) => r,
    }
}

async fn post_study(State(gw): State<Arc<Gateway>>, Path(id): Path<String>, Json(spec): Json<StudySpec>) -> Response {
    let actor = match lookup(&gw, &id) {
        Ok(a) => a,
        Err(r) => return r,
    };
    match submit(&actor, |reply| Command::Study { spec, reply }).await {
        Ok((result, report)) => Json(json!({
            "label": result.label,
            "report": report,
            "table": result.render_table(),
            "result": result,
        }))
        .into_response(),
        Err(r) => r,
    }
}

async fn get_report(State(gw): State<Arc<Gateway>>, Path((id, label)): Path<(String, String)>) -> Response {
    let actor = match lookup(&gw, &id) {
        Ok(a) => a,
        Err(r) => return r,
    };
    if !valid_session_id(&label) {
        return api_error(StatusCode::NOT_FOUND, "not_found", format!("no report for study '{label}'"));
    }
    let path = actor.workdir.join(report_path(&label));
    match std::fs::read_to_string(&path).ok().and_then(|t| serde_json::from_str::<Value>(&t).ok()) {
        Some(v) => Json(v).into_response(),
        None => api_error(StatusCode::NOT_FOUND, "not_found", format!("no report for study '{label}'")),
    }
}
