//! Durable session logs and the local HTTP gateway that exposes sessions,
//! their event streams, approvals and study reports.

mod server;
mod store;

pub use server::{bind, generate_token, serve, serve_on, Gateway, GatewayError, SessionFactory, SessionParts, DEFAULT_BIND};
pub use store::{valid_session_id, Replayed, SessionMeta, SessionStore, StoreError, StoreSink, LOG_FILE, META_FILE};
