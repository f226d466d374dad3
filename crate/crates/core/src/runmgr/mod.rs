//! Solver launching, incremental log parsing and failure classification.

mod launch;
mod log;
pub mod stub;

pub use launch::{launch_run, log_file_name, now_ms, run_to_completion, RunError, RunHandle, RunRecord};
pub use log::{
    classify, parse_log, DiagnosticKind, LogDiagnostic, ProgressTracker, SolverProgress, CONTINUITY_LIMIT,
    COURANT_LIMIT, DEFAULT_TAIL_LINES,
};
