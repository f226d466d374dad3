use std::fs::File;
use std::io::{Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};
use std::process::{Child, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::log::{classify, LogDiagnostic, ProgressTracker, SolverProgress, DEFAULT_TAIL_LINES};
use crate::toolkit::{spawn_confined, terminate_group, SandboxPolicy, ToolError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub id: String,
    pub case_root: PathBuf,
    pub command: String,
    /// Unix milliseconds.
    pub started_at: u64,
    pub ended_at: Option<u64>,
    pub exit_code: Option<i32>,
    pub log_path: PathBuf,
    pub diagnostic: LogDiagnostic,
    pub progress: SolverProgress,
}

impl RunRecord {
    pub fn is_clean(&self) -> bool {
        self.diagnostic.kind == super::DiagnosticKind::CleanExit
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Denied(ToolError),
    #[error("empty command")]
    EmptyCommand,
    #[error("case directory {0} does not exist")]
    MissingCase(String),
    #[error("failed to start '{command}': {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
}

pub fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// `log.<solver>` where solver is the basename of the command's first token.
pub fn log_file_name(command: &str) -> String {
    let first = command.split_whitespace().next().unwrap_or("run");
    let base = first.rsplit('/').next().filter(|s| !s.is_empty()).unwrap_or("run");
    format!("log.{base}")
}

/// A running solver process whose log is read incrementally.
pub struct RunHandle {
    record: RunRecord,
    child: Child,
    log: File,
    offset: u64,
    partial: Vec<u8>,
    text: String,
    tracker: ProgressTracker,
    started: Instant,
    timeout: Duration,
    tail_lines: usize,
}

pub fn launch_run(
    policy: &SandboxPolicy,
    case_root: impl AsRef<Path>,
    command: &str,
    id: impl Into<String>,
) -> Result<RunHandle, RunError> {
    if command.trim().is_empty() {
        return Err(RunError::EmptyCommand);
    }
    let case = policy.resolve(case_root.as_ref()).map_err(RunError::Denied)?;
    if !case.is_dir() {
        return Err(RunError::MissingCase(case.display().to_string()));
    }
    let log_path = case.join(log_file_name(command));
    let spawn_err = |source| RunError::Spawn {
        command: command.to_string(),
        source,
    };
    let out = File::create(&log_path).map_err(spawn_err)?;
    let log = File::open(&log_path).map_err(spawn_err)?;
    let child = spawn_confined(policy, &case, command, Stdio::from(out)).map_err(spawn_err)?;
    Ok(RunHandle {
        record: RunRecord {
            id: id.into(),
            case_root: case,
            command: command.to_string(),
            started_at: now_ms(),
            ended_at: None,
            exit_code: None,
            log_path,
            diagnostic: LogDiagnostic {
                kind: super::DiagnosticKind::UnknownFailure,
                excerpt: String::new(),
                source_line: None,
            },
            progress: SolverProgress::default(),
        },
        child,
        log,
        offset: 0,
        partial: Vec::new(),
        text: String::new(),
        tracker: ProgressTracker::new(),
        started: Instant::now(),
        timeout: policy.timeout,
        tail_lines: DEFAULT_TAIL_LINES,
    })
}

impl RunHandle {
    pub fn with_tail_lines(mut self, n: usize) -> Self {
        self.tail_lines = n.max(1);
        self
    }

    pub fn id(&self) -> &str {
        &self.record.id
    }

    pub fn log_path(&self) -> &Path {
        &self.record.log_path
    }

    /// Reads newly written complete lines; returns a snapshot per finished step.
    pub fn poll(&mut self) -> Vec<SolverProgress> {
        let mut buf = Vec::new();
        if self.log.seek(SeekFrom::Start(self.offset)).is_ok() {
            let _ = self.log.read_to_end(&mut buf);
        }
        self.offset += buf.len() as u64;
        self.partial.extend_from_slice(&buf);
        let Some(last_nl) = self.partial.iter().rposition(|&b| b == b'\n') else {
            return Vec::new();
        };
        let complete: Vec<u8> = self.partial.drain(..=last_nl).collect();
        let chunk = String::from_utf8_lossy(&complete).into_owned();
        let mut steps = Vec::new();
        for line in chunk.lines() {
            if let Some(s) = self.tracker.feed_line(line) {
                steps.push(s);
            }
        }
        self.text.push_str(&chunk);
        steps
    }

    /// Waits for exit (or the policy timeout), calling `on_step` for each
    /// finished time step in log order.
    pub fn wait(mut self, mut on_step: impl FnMut(&SolverProgress)) -> RunRecord {
        let deadline = self.started + self.timeout;
        let (exit_code, timed_out) = loop {
            for s in self.poll() {
                on_step(&s);
            }
            match self.child.try_wait() {
                Ok(Some(status)) => break (Some(status.code().unwrap_or(-1)), false),
                Ok(None) if Instant::now() >= deadline => {
                    terminate_group(&mut self.child);
                    break (None, true);
                }
                Ok(None) => std::thread::sleep(Duration::from_millis(10)),
                Err(_) => break (None, false),
            }
        };
        for s in self.poll() {
            on_step(&s);
        }
        if !self.partial.is_empty() {
            let rest = String::from_utf8_lossy(&std::mem::take(&mut self.partial)).into_owned();
            if let Some(s) = self.tracker.feed_line(&rest) {
                on_step(&s);
            }
            self.text.push_str(&rest);
        }
        if let Some(s) = self.tracker.finish() {
            on_step(&s);
        }
        self.record.ended_at = Some(now_ms().max(self.record.started_at));
        self.record.exit_code = exit_code;
        self.record.progress = self.tracker.progress().clone();
        self.record.diagnostic = classify(&self.text, self.tracker.finding(), exit_code, timed_out, self.tail_lines);
        self.record
    }
}

/// Launches and waits in one call.
pub fn run_to_completion(
    policy: &SandboxPolicy,
    case_root: impl AsRef<Path>,
    command: &str,
    id: impl Into<String>,
    tail_lines: usize,
    on_step: impl FnMut(&SolverProgress),
) -> Result<RunRecord, RunError> {
    Ok(launch_run(policy, case_root, command, id)?
        .with_tail_lines(tail_lines)
        .wait(on_step))
}
