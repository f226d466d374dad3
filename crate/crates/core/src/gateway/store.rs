//! Append-only per-session event logs: one JSON record per line.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::orchestrator::{EventRecord, EventSink, FoldError, SessionView};
use crate::runmgr::now_ms;

pub const LOG_FILE: &str = "events.jsonl";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("unknown session '{0}'")]
    UnknownSession(String),
    #[error("session '{0}' already exists")]
    SessionExists(String),
    #[error("invalid session id '{0}'")]
    InvalidId(String),
    #[error("seq conflict: expected {expected}, got {got}")]
    SeqConflict { expected: u64, got: u64 },
    #[error("corrupt log at seq {seq}: {reason}")]
    CorruptLog {
        seq: u64,
        reason: String,
        /// State folded from the records before the corrupt one.
        partial: Box<Replayed>,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub id: String,
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replayed {
    pub view: SessionView,
    pub records: Vec<EventRecord>,
}

pub fn valid_session_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
}

pub struct SessionStore {
    root: PathBuf,
    /// Last appended seq per session, loaded lazily.
    heads: Mutex<HashMap<String, u64>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

impl SessionStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Self {
            root,
            heads: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, id: &str) -> Result<PathBuf, StoreError> {
        if !valid_session_id(id) {
            return Err(StoreError::InvalidId(id.to_string()));
        }
        Ok(self.root.join(id))
    }

    pub fn log_path(&self, id: &str) -> Result<PathBuf, StoreError> {
        Ok(self.dir(id)?.join(LOG_FILE))
    }

    pub fn exists(&self, id: &str) -> bool {
        self.log_path(id).is_ok_and(|p| p.is_file())
    }

    pub fn create_session(&self, id: &str) -> Result<SessionMeta, StoreError> {
        let dir = self.dir(id)?;
        if dir.join(LOG_FILE).exists() {
            return Err(StoreError::SessionExists(id.to_string()));
        }
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let meta = SessionMeta {
            id: id.to_string(),
            created_at: now_ms(),
        };
        let meta_path = dir.join(META_FILE);
        std::fs::write(&meta_path, serde_json::to_string_pretty(&meta).unwrap_or_default()).map_err(io_err(&meta_path))?;
        let log = dir.join(LOG_FILE);
        File::create(&log).and_then(|f| f.sync_all()).map_err(io_err(&log))?;
        self.heads.lock().expect("store lock").insert(id.to_string(), 0);
        Ok(meta)
    }

    pub fn list_sessions(&self) -> Result<Vec<String>, StoreError> {
        let mut ids: Vec<String> = std::fs::read_dir(&self.root)
            .map_err(io_err(&self.root))?
            .filter_map(Result::ok)
            .filter(|e| e.path().join(LOG_FILE).is_file())
            .filter_map(|e| e.file_name().to_str().map(String::from))
            .filter(|id| valid_session_id(id))
            .collect();
        ids.sort();
        Ok(ids)
    }

    /// Reads every complete record. Stops at the first line that does not
    /// decode, is not newline-terminated, or breaks seq density.
    pub fn read_records(&self, id: &str) -> Result<(Vec<EventRecord>, Option<(u64, String)>), StoreError> {
        let path = self.log_path(id)?;
        if !path.is_file() {
            return Err(StoreError::UnknownSession(id.to_string()));
        }
        let bytes = std::fs::read(&path).map_err(io_err(&path))?;
        let mut records = Vec::new();
        let mut rest: &[u8] = &bytes;
        while !rest.is_empty() {
            let expected = records.len() as u64 + 1;
            let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
                return Ok((records, Some((expected, "truncated record".into()))));
            };
            let line = &rest[..nl];
            rest = &rest[nl + 1..];
            match serde_json::from_slice::<EventRecord>(line) {
                Ok(r) if r.seq == expected => records.push(r),
                Ok(r) => return Ok((records, Some((expected, format!("found seq {}", r.seq))))),
                Err(e) => return Ok((records, Some((expected, e.to_string())))),
            }
        }
        Ok((records, None))
    }

    pub fn replay(&self, id: &str) -> Result<Replayed, StoreError> {
        let (records, corrupt) = self.read_records(id)?;
        let mut view = SessionView::new(id);
        for (i, r) in records.iter().enumerate() {
            if let Err(e) = view.apply(r) {
                let seq = match &e {
                    FoldError::OutOfOrder { seq, .. } | FoldError::BadPayload { seq, .. } | FoldError::IllegalTransition { seq, .. } => *seq,
                };
                return Err(StoreError::CorruptLog {
                    seq,
                    reason: e.to_string(),
                    partial: Box::new(Replayed {
                        view,
                        records: records[..i].to_vec(),
                    }),
                });
            }
        }
        match corrupt {
            None => Ok(Replayed { view, records }),
            Some((seq, reason)) => Err(StoreError::CorruptLog {
                seq,
                reason,
                partial: Box::new(Replayed { view, records }),
            }),
        }
    }

    fn head(&self, id: &str) -> Result<u64, StoreError> {
        if let Some(h) = self.heads.lock().expect("store lock").get(id) {
            return Ok(*h);
        }
        let (records, corrupt) = self.read_records(id)?;
        if let Some((seq, reason)) = corrupt {
            return Err(StoreError::CorruptLog {
                seq,
                reason,
                partial: Box::new(Replayed {
                    view: SessionView::new(id),
                    records,
                }),
            });
        }
        let head = records.last().map_or(0, |r| r.seq);
        self.heads.lock().expect("store lock").insert(id.to_string(), head);
        Ok(head)
    }

    /// Appends one record and syncs it to disk before returning its seq.
    pub fn append_event(&self, id: &str, record: &EventRecord) -> Result<u64, StoreError> {
        let head = self.head(id)?;
        if record.seq != head + 1 {
            return Err(StoreError::SeqConflict {
                expected: head + 1,
                got: record.seq,
            });
        }
        let path = self.log_path(id)?;
        let mut line = serde_json::to_vec(record).expect("event records serialize");
        line.push(b'\n');
        let mut f = OpenOptions::new().append(true).open(&path).map_err(io_err(&path))?;
        f.write_all(&line).and_then(|_| f.sync_data()).map_err(io_err(&path))?;
        self.heads.lock().expect("store lock").insert(id.to_string(), record.seq);
        Ok(record.seq)
    }
}

/// Persists session events, then hands them to `then`.
pub struct StoreSink<F: FnMut(&EventRecord) + Send> {
    pub store: std::sync::Arc<SessionStore>,
    pub id: String,
    pub then: F,
}

impl<F: FnMut(&EventRecord) + Send> EventSink for StoreSink<F> {
    fn append(&mut self, record: &EventRecord) -> Result<(), String> {
        self.store.append_event(&self.id, record).map_err(|e| e.to_string())?;
        (self.then)(record);
        Ok(())
    }
}
