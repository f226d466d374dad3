//! Solver log parsing and failure classification.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    CleanExit,
    FatalError,
    FloatingPointException,
    MeshError,
    CourantBlowup,
    Diverged,
    Timeout,
    UnknownFailure,
}

impl DiagnosticKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticKind::CleanExit => "clean_exit",
            DiagnosticKind::FatalError => "fatal_error",
            DiagnosticKind::FloatingPointException => "floating_point_exception",
            DiagnosticKind::MeshError => "mesh_error",
            DiagnosticKind::CourantBlowup => "courant_blowup",
            DiagnosticKind::Diverged => "diverged",
            DiagnosticKind::Timeout => "timeout",
            DiagnosticKind::UnknownFailure => "unknown_failure",
        }
    }
}

impl std::fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogDiagnostic {
    pub kind: DiagnosticKind,
    pub excerpt: String,
    pub source_line: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverProgress {
    pub latest_time: f64,
    pub steps_completed: usize,
    pub max_courant: Option<f64>,
    pub latest_continuity_error: Option<f64>,
}

pub const COURANT_LIMIT: f64 = 100.0;
pub const CONTINUITY_LIMIT: f64 = 1e3;
pub const DEFAULT_TAIL_LINES: usize = 60;

fn courant_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"Courant Number mean: \S+ max: (\S+)").unwrap())
}

fn continuity_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"time step continuity errors : sum local = ([^,\s]+)").unwrap())
}

fn failed_checks_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"Failed \d+ mesh checks").unwrap())
}

fn parse_time(line: &str) -> Option<f64> {
    let rest = line.strip_prefix("Time = ")?;
    let tok = rest.split_whitespace().next()?;
    tok.trim_end_matches('s').parse().ok()
}

/// The failure class a single line signals, if any.
fn line_kind(line: &str) -> Option<DiagnosticKind> {
    if line.contains("FOAM FATAL ERROR") || line.contains("FOAM FATAL IO ERROR") {
        return Some(DiagnosticKind::FatalError);
    }
    if line.contains("Floating point exception") || (line.contains("sigFpe") && !line.contains("sigFpe : Enabling")) {
        return Some(DiagnosticKind::FloatingPointException);
    }
    if line.contains("face pyramids")
        || line.contains("***Zero or negative cell volume")
        || failed_checks_re().is_match(line)
    {
        return Some(DiagnosticKind::MeshError);
    }
    if let Some(c) = courant_re().captures(line) {
        if c[1].parse::<f64>().is_ok_and(|x| x > COURANT_LIMIT) {
            return Some(DiagnosticKind::CourantBlowup);
        }
    }
    if let Some(c) = continuity_re().captures(line) {
        if c[1].parse::<f64>().is_ok_and(|x| x.abs() > CONTINUITY_LIMIT) {
            return Some(DiagnosticKind::Diverged);
        }
    }
    None
}

/// Incremental log reader: feed complete lines, get a progress snapshot for
/// each finished time step.
#[derive(Debug, Clone, Default)]
pub struct ProgressTracker {
    progress: SolverProgress,
    line_no: usize,
    in_step: bool,
    /// Highest-priority finding so far, with its first line.
    finding: Option<(DiagnosticKind, usize)>,
}

impl ProgressTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the snapshot of the previous step when `line` opens a new one.
    pub fn feed_line(&mut self, line: &str) -> Option<SolverProgress> {
        self.line_no += 1;
        if let Some(kind) = line_kind(line) {
            match self.finding {
                Some((k, _)) if k <= kind => {}
                _ => self.finding = Some((kind, self.line_no)),
            }
        }
        let mut completed = None;
        if let Some(t) = parse_time(line) {
            if self.in_step {
                completed = Some(self.progress.clone());
            }
            self.in_step = true;
            self.progress.steps_completed += 1;
            self.progress.latest_time = self.progress.latest_time.max(t);
        } else if let Some(c) = courant_re().captures(line) {
            if let Ok(x) = c[1].parse() {
                self.progress.max_courant = Some(x);
            }
        } else if let Some(c) = continuity_re().captures(line) {
            if let Ok(x) = c[1].parse() {
                self.progress.latest_continuity_error = Some(x);
            }
        }
        completed
    }

    /// Snapshot of the last open step, if any; call once the log is complete.
    pub fn finish(&mut self) -> Option<SolverProgress> {
        if std::mem::take(&mut self.in_step) {
            Some(self.progress.clone())
        } else {
            None
        }
    }

    pub fn progress(&self) -> &SolverProgress {
        &self.progress
    }

    pub fn finding(&self) -> Option<(DiagnosticKind, usize)> {
        self.finding
    }
}

/// Progress plus diagnostic for a complete log. The exit code is needed to
/// tell a clean run from an unexplained failure.
pub fn parse_log(text: &str, exit_code: Option<i32>) -> (SolverProgress, LogDiagnostic) {
    let mut t = ProgressTracker::new();
    for line in text.lines() {
        t.feed_line(line);
    }
    let diag = classify(text, t.finding(), exit_code, false, DEFAULT_TAIL_LINES);
    (t.progress.clone(), diag)
}

pub fn classify(
    text: &str,
    finding: Option<(DiagnosticKind, usize)>,
    exit_code: Option<i32>,
    timed_out: bool,
    tail_lines: usize,
) -> LogDiagnostic {
    let tail_lines = tail_lines.max(1);
    let lines: Vec<&str> = text.lines().collect();
    let (kind, source_line) = match finding {
        Some((k, line)) => (k, Some(line)),
        None if timed_out => (DiagnosticKind::Timeout, None),
        None if exit_code == Some(0) => (DiagnosticKind::CleanExit, None),
        None => (DiagnosticKind::UnknownFailure, None),
    };
    let window: &[&str] = match source_line {
        Some(n) => {
            let at = n - 1;
            let lead = (tail_lines / 4).min(3);
            let start = at.saturating_sub(lead);
            let end = (start + tail_lines).min(lines.len());
            &lines[start..end]
        }
        None => &lines[lines.len().saturating_sub(tail_lines)..],
    };
    let mut excerpt = window.join("\n");
    if excerpt.trim().is_empty() && kind != DiagnosticKind::CleanExit {
        excerpt = match (kind, exit_code) {
            (DiagnosticKind::Timeout, _) => "(no solver output before the timeout)".to_string(),
            (_, Some(c)) => format!("(no solver output; exit code {c})"),
            (_, None) => "(no solver output)".to_string(),
        };
    }
    LogDiagnostic {
        kind,
        excerpt,
        source_line,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_lines_drive_progress() {
        let log = "Starting time loop\n\nTime = 0.01\n\nCourant Number mean: 0.1 max: 0.4\nTime = 0.02\nCourant Number mean: 0.2 max: 0.7\ntime step continuity errors : sum local = 2e-09, global = 1e-10, cumulative = 1e-10\nExecutionTime = 0.1 s\n";
        let (p, d) = parse_log(log, Some(0));
        assert_eq!(p.latest_time, 0.02);
        assert_eq!(p.steps_completed, 2);
        assert_eq!(p.max_courant, Some(0.7));
        assert_eq!(p.latest_continuity_error, Some(2e-9));
        assert_eq!(d.kind, DiagnosticKind::CleanExit);
    }

    #[test]
    fn fatal_error_line() {
        let log = "Time = 1\n\n--> FOAM FATAL ERROR: \nbad thing\n\nFOAM exiting\n";
        let (_, d) = parse_log(log, Some(1));
        assert_eq!(d.kind, DiagnosticKind::FatalError);
        assert_eq!(d.source_line, Some(3));
        assert!(d.excerpt.contains("bad thing"));
    }

    #[test]
    fn empty_log_clean() {
        let (p, d) = parse_log("", Some(0));
        assert_eq!(p, SolverProgress::default());
        assert_eq!(d.kind, DiagnosticKind::CleanExit);
        let (_, d) = parse_log("", Some(2));
        assert_eq!(d.kind, DiagnosticKind::UnknownFailure);
        assert!(!d.excerpt.is_empty());
    }

    #[test]
    fn priority_order() {
        let log = "Courant Number mean: 1 max: 500\n#1  Foam::sigFpe::sigHandler(int)\n--> FOAM FATAL IO ERROR:\n";
        assert_eq!(parse_log(log, Some(1)).1.kind, DiagnosticKind::FatalError);
        let log = "Courant Number mean: 1 max: 500\n#1  Foam::sigFpe::sigHandler(int)\n";
        assert_eq!(parse_log(log, None).1.kind, DiagnosticKind::FloatingPointException);
        let log = "sigFpe : Enabling floating point exception trapping (FOAM_SIGFPE).\nEnd\n";
        assert_eq!(parse_log(log, Some(0)).1.kind, DiagnosticKind::CleanExit);
        let log = " ***Error in face pyramids: 4 faces are incorrectly oriented.\nCourant Number mean: 1 max: 500\n";
        assert_eq!(parse_log(log, Some(0)).1.kind, DiagnosticKind::MeshError);
        assert_eq!(parse_log("Failed 2 mesh checks.\n", Some(1)).1.kind, DiagnosticKind::MeshError);
        let log = "Courant Number mean: 1 max: 100.5\ntime step continuity errors : sum local = 5e3, global = 1, cumulative = 1\n";
        assert_eq!(parse_log(log, Some(1)).1.kind, DiagnosticKind::CourantBlowup);
        let log = "time step continuity errors : sum local = -5e3, global = 1, cumulative = 1\n";
        assert_eq!(parse_log(log, Some(0)).1.kind, DiagnosticKind::Diverged);
        assert_eq!(parse_log("Courant Number mean: 1 max: 100\n", Some(0)).1.kind, DiagnosticKind::CleanExit);
    }

    #[test]
    fn timeout_only_without_patterns() {
        let d = classify("Time = 1\n", None, None, true, 10);
        assert_eq!(d.kind, DiagnosticKind::Timeout);
        let d = classify("", None, None, true, 10);
        assert!(!d.excerpt.is_empty());
    }

    #[test]
    fn excerpt_is_bounded() {
        let log: String = (0..500).map(|i| format!("line {i}\n")).collect();
        let d = classify(&log, None, Some(1), false, 7);
        assert_eq!(d.excerpt.lines().count(), 7);
        assert!(d.excerpt.ends_with("line 499"));
        let mut t = ProgressTracker::new();
        let mut fatal = log.clone();
        fatal.push_str("--> FOAM FATAL ERROR:\n");
        fatal.push_str(&log);
        for l in fatal.lines() {
            t.feed_line(l);
        }
        let d = classify(&fatal, t.finding(), Some(1), false, 8);
        assert_eq!(d.excerpt.lines().count(), 8);
        assert!(d.excerpt.contains("FOAM FATAL ERROR"));
    }

    #[test]
    fn tracker_snapshots_completed_steps() {
        let mut t = ProgressTracker::new();
        assert!(t.feed_line("Time = 1").is_none());
        assert!(t.feed_line("Courant Number mean: 0.1 max: 0.2").is_none());
        let s = t.feed_line("Time = 2").unwrap();
        assert_eq!((s.steps_completed, s.max_courant), (1, Some(0.2)));
        let s = t.finish().unwrap();
        assert_eq!(s.steps_completed, 2);
        assert!(t.finish().is_none());
    }
}
