use std::path::Path;

use serde_json::{json, Value};

use super::events::{EventKind, EventRecord, SessionView};
use super::tasks::{plan_create, plan_update, render_tasks, TaskItem, TaskStatus};
use super::tools::{agent_tool_specs, arg_str, arg_u64, dispatch_tool, invalid, outcome_summary, outcome_text, run_study_with_report, ToolContext};
use super::{
    ApprovalRequest, CorrectionPolicy, OrchestratorError, SessionState, Verdict, DEFAULT_LOOP_BUDGET,
};
use crate::llm::{ChatMessage, ChatProvider, Role, ToolCallRequest};
use crate::runmgr::{launch_run, now_ms, RunRecord};
use crate::skills::{load_skill, match_skills};
use crate::study::{relativize, StudyEvent, StudyResult, StudySpec};
use crate::toolkit::{Danger, ErrorKind, ToolOutcome, ToolSpec};

/// Receives every record before it is applied to the session.
pub trait EventSink: Send {
    fn append(&mut self, record: &EventRecord) -> Result<(), String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateDecision {
    Dispatch,
    Hold,
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub auto_approve: bool,
    pub correction: CorrectionPolicy,
    pub loop_budget: usize,
    /// Inject matching skills into the system prompt at the first turn.
    pub auto_skills: bool,
    pub system_template: String,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            auto_approve: false,
            correction: CorrectionPolicy::default(),
            loop_budget: DEFAULT_LOOP_BUDGET,
            auto_skills: false,
            system_template: super::DEFAULT_SYSTEM_TEMPLATE.to_string(),
        }
    }
}

struct Journal {
    view: SessionView,
    log: Vec<EventRecord>,
    sink: Option<Box<dyn EventSink>>,
}

impl Journal {
    fn emit(&mut self, kind: EventKind, payload: Value) -> Result<EventRecord, OrchestratorError> {
        let rec = EventRecord {
            seq: self.view.last_seq + 1,
            timestamp: now_ms(),
            kind,
            payload,
        };
        let mut next = self.view.clone();
        next.apply(&rec)?;
        if let Some(sink) = self.sink.as_mut() {
            sink.append(&rec).map_err(OrchestratorError::Persist)?;
        }
        self.view = next;
        self.log.push(rec.clone());
        Ok(rec)
    }
}

#[derive(Debug, Clone)]
struct ActiveCorrection {
    case: String,
    command: String,
    attempts: u32,
}

pub struct Session {
    journal: Journal,
    provider: Box<dyn ChatProvider>,
    ctx: ToolContext,
    config: SessionConfig,
    specs: Vec<ToolSpec>,
    system_prompt: String,
    correction: Option<ActiveCorrection>,
    iterations: usize,
    read_only: bool,
}

/// Diagnostic message handed back to the model after a run.
pub fn feedback_text(record: &RunRecord, attempt: u32, max_attempts: u32, log_tail: &str) -> String {
    let exit = record.exit_code.map_or("none".to_string(), |c| c.to_string());
    let head = format!(
        "[execution feedback] run {} (attempt {attempt}/{max_attempts}) of `{}` in {}: {}, exit {exit}",
        record.id,
        record.command,
        record.case_root.display(),
        record.diagnostic.kind
    );
    if record.is_clean() {
        return format!(
            "{head}\nreached time {} after {} steps",
            crate::foamdict::format_number(record.progress.latest_time),
            record.progress.steps_completed
        );
    }
    let n = log_tail.lines().count();
    format!(
        "{head}\n--- diagnostic ---\n{}\n--- last {n} log lines ---\n{log_tail}",
        record.diagnostic.excerpt.trim_end()
    )
}

fn last_lines(text: &str, n: usize) -> String {
    let lines: Vec<&str> = text.lines().collect();
    lines[lines.len().saturating_sub(n)..].join("\n")
}

impl Session {
    pub fn new(id: impl Into<String>, provider: Box<dyn ChatProvider>, ctx: ToolContext, config: SessionConfig) -> Self {
        Self::resume(SessionView::new(id), Vec::new(), provider, ctx, config)
    }

    /// Continues a session from a replayed view and its log.
    pub fn resume(
        view: SessionView,
        log: Vec<EventRecord>,
        provider: Box<dyn ChatProvider>,
        ctx: ToolContext,
        config: SessionConfig,
    ) -> Self {
        let specs = agent_tool_specs();
        let workdir = ctx.policy.root.display().to_string();
        let system_prompt = super::render_system_prompt(&config.system_template, &specs, &ctx.skills, &workdir);
        Self {
            journal: Journal { view, log, sink: None },
            provider,
            ctx,
            config,
            specs,
            system_prompt,
            correction: None,
            iterations: 0,
            read_only: false,
        }
    }

    pub fn with_sink(mut self, sink: Box<dyn EventSink>) -> Self {
        self.journal.sink = Some(sink);
        self
    }

    pub fn set_read_only(&mut self, read_only: bool) {
        self.read_only = read_only;
    }

    pub fn id(&self) -> &str {
        &self.journal.view.id
    }

    pub fn view(&self) -> &SessionView {
        &self.journal.view
    }

    pub fn state(&self) -> SessionState {
        self.journal.view.state
    }

    pub fn transcript(&self) -> &[ChatMessage] {
        &self.journal.view.transcript
    }

    pub fn log(&self) -> &[EventRecord] {
        &self.journal.log
    }

    pub fn tools(&self) -> &[ToolSpec] {
        &self.specs
    }

    pub fn context(&self) -> &ToolContext {
        &self.ctx
    }

    pub fn system_prompt(&self) -> &str {
        &self.system_prompt
    }

    fn since(&self, start: usize) -> Vec<EventRecord> {
        self.journal.log[start..].to_vec()
    }

    fn emit(&mut self, kind: EventKind, payload: Value) -> Result<EventRecord, OrchestratorError> {
        self.journal.emit(kind, payload)
    }

    fn writable(&self) -> Result<(), OrchestratorError> {
        if self.read_only {
            Err(OrchestratorError::ReadOnly)
        } else {
            Ok(())
        }
    }

    fn expect_ready(&self) -> Result<(), OrchestratorError> {
        self.writable()?;
        match self.state() {
            SessionState::Idle | SessionState::AwaitingUser => Ok(()),
            actual => Err(OrchestratorError::InvalidState {
                expected: "idle or awaiting_user",
                actual,
            }),
        }
    }

    /// Records an error and moves to `failed`.
    fn fail(&mut self, message: String, extra: Value) -> Result<(), OrchestratorError> {
        self.correction = None;
        let mut payload = json!({"message": message, "fatal": true});
        if let (Value::Object(p), Value::Object(e)) = (&mut payload, extra) {
            p.extend(e);
        }
        self.emit(EventKind::Error, payload)?;
        let from = self.state();
        self.emit(EventKind::StateChanged, json!({"from": from, "to": SessionState::Failed}))?;
        Ok(())
    }

    /// One user turn: model and tool steps until the model answers without
    /// tool calls, an approval is pending, or the session fails.
    pub fn run_turn(&mut self, user_input: &str) -> Result<Vec<EventRecord>, OrchestratorError> {
        self.expect_ready()?;
        let start = self.journal.log.len();
        if self.config.auto_skills && self.transcript().is_empty() {
            for name in match_skills(&self.ctx.skills, user_input) {
                if let Ok(block) = load_skill(&self.ctx.skills, &name) {
                    self.system_prompt.push('\n');
                    self.system_prompt.push_str(&block);
                }
            }
        }
        self.emit(EventKind::UserMsg, json!({"message": ChatMessage::user(user_input), "origin": "user"}))?;
        self.iterations = 0;
        self.drive()?;
        Ok(self.since(start))
    }

    fn drive(&mut self) -> Result<(), OrchestratorError> {
        loop {
            match self.state() {
                SessionState::AwaitingModel => self.model_step()?,
                SessionState::AwaitingTool => {
                    let Some(call) = self.journal.view.outstanding_calls().into_iter().next() else {
                        self.fail("no outstanding tool call while awaiting a tool".into(), json!({}))?;
                        return Ok(());
                    };
                    match self.gate(&call) {
                        Err(OrchestratorError::UnknownTool(name)) => {
                            let o = ToolOutcome::failure(ErrorKind::NotFound, format!("unknown tool '{name}'"));
                            self.emit_tool_result(&call, &o)?;
                        }
                        Err(e) => return Err(e),
                        Ok(GateDecision::Dispatch) => self.execute(&call)?,
                        Ok(GateDecision::Hold) => {
                            self.request_approval(call)?;
                            return Ok(());
                        }
                    }
                }
                SessionState::AwaitingUser if self.correction.is_some() => self.relaunch()?,
                _ => return Ok(()),
            }
        }
    }

    fn model_step(&mut self) -> Result<(), OrchestratorError> {
        let mut messages = Vec::with_capacity(self.transcript().len() + 1);
        messages.push(ChatMessage::system(self.system_prompt.clone()));
        messages.extend_from_slice(self.transcript());
        let reply = match self.provider.complete(&messages, &self.specs) {
            Ok(r) => r,
            Err(e) => {
                self.fail(e.to_string(), json!({"provider_error": e}))?;
                return Err(e.into());
            }
        };
        if reply.role != Role::Assistant || reply.validate().is_err() {
            let msg = "provider returned a malformed assistant message".to_string();
            self.fail(msg.clone(), json!({}))?;
            return Err(OrchestratorError::Provider(crate::llm::LlmError::InvalidRequest(msg)));
        }
        if !reply.tool_calls.is_empty() {
            self.iterations += 1;
            if self.iterations > self.config.loop_budget {
                let budget = self.config.loop_budget;
                self.fail(format!("loop budget of {budget} iterations exceeded"), json!({}))?;
                return Err(OrchestratorError::LoopBudgetExceeded(budget));
            }
        }
        self.emit(EventKind::AssistantMsg, json!({"message": reply}))?;
        Ok(())
    }

    /// Safe tools and auto-approved sessions dispatch; destructive tools wait
    /// for a verdict.
    pub fn gate(&self, call: &ToolCallRequest) -> Result<GateDecision, OrchestratorError> {
        let spec = self
            .specs
            .iter()
            .find(|s| s.name == call.tool_name)
            .ok_or_else(|| OrchestratorError::UnknownTool(call.tool_name.clone()))?;
        if spec.danger == Danger::Safe || self.config.auto_approve {
            Ok(GateDecision::Dispatch)
        } else {
            Ok(GateDecision::Hold)
        }
    }

    fn request_approval(&mut self, call: ToolCallRequest) -> Result<(), OrchestratorError> {
        let rationale = self
            .transcript()
            .iter()
            .rev()
            .find(|m| m.role == Role::Assistant)
            .map(|m| m.text.clone())
            .unwrap_or_default();
        let approval = ApprovalRequest {
            id: format!("approval-{}", self.journal.view.approvals_requested + 1),
            tool_call: call,
            rationale,
            created_at: now_ms(),
        };
        self.emit(EventKind::ApprovalRequested, json!({"approval": approval}))?;
        Ok(())
    }

    pub fn resolve_approval(&mut self, approval_id: &str, verdict: Verdict, note: &str) -> Result<Vec<EventRecord>, OrchestratorError> {
        self.writable()?;
        let view = &self.journal.view;
        let Some(approval) = view.pending_approvals.iter().find(|a| a.id == approval_id).cloned() else {
            return Err(if view.resolved_approvals.contains(approval_id) {
                OrchestratorError::StaleApproval(approval_id.to_string())
            } else {
                OrchestratorError::UnknownApproval(approval_id.to_string())
            });
        };
        let start = self.journal.log.len();
        self.emit(
            EventKind::ApprovalResolved,
            json!({"approval_id": approval_id, "verdict": verdict, "note": note}),
        )?;
        match verdict {
            Verdict::Approve => self.execute(&approval.tool_call)?,
            Verdict::Deny => {
                let o = ToolOutcome::failure(ErrorKind::Denied, format!("denied by user: {note}"));
                self.emit(
                    EventKind::ToolResult,
                    json!({"message": ChatMessage::tool(approval.tool_call.id.clone(), o.content.clone()), "outcome": outcome_summary(&o)}),
                )?;
            }
        }
        self.iterations = 0;
        self.drive()?;
        Ok(self.since(start))
    }

    fn emit_tool_result(&mut self, call: &ToolCallRequest, o: &ToolOutcome) -> Result<(), OrchestratorError> {
        self.emit(
            EventKind::ToolResult,
            json!({"message": ChatMessage::tool(call.id.clone(), outcome_text(o)), "outcome": outcome_summary(o)}),
        )?;
        Ok(())
    }

    fn execute(&mut self, call: &ToolCallRequest) -> Result<(), OrchestratorError> {
        let args = &call.arguments;
        let outcome = match call.tool_name.as_str() {
            "task_create" => {
                let parsed = arg_str(args, "title").and_then(|title| {
                    let deps: Vec<u64> = match args.get("depends_on") {
                        None | Some(Value::Null) => Vec::new(),
                        Some(v) => serde_json::from_value(v.clone()).map_err(invalid)?,
                    };
                    Ok((title.to_string(), deps))
                });
                match parsed {
                    Ok((title, deps)) => match self.task_create(&title, deps) {
                        Ok(t) => ToolOutcome::success(format!("created task #{}: {}", t.id, t.title)),
                        Err(e) => ToolOutcome::failure(ErrorKind::Conflict, e.to_string()),
                    },
                    Err(o) => o,
                }
            }
            "task_update" => {
                let parsed = arg_u64(args, "id").and_then(|id| {
                    let id = id.ok_or_else(|| invalid("'id' is required"))?;
                    let status: TaskStatus = arg_str(args, "status")?.parse().map_err(invalid)?;
                    Ok((id, status))
                });
                match parsed {
                    Ok((id, status)) => match self.task_update(id, status) {
                        Ok(t) => ToolOutcome::success(format!("task #{} is now {}", t.id, t.status.as_str())),
                        Err(e) => ToolOutcome::failure(ErrorKind::Conflict, e.to_string()),
                    },
                    Err(o) => o,
                }
            }
            "task_list" => ToolOutcome::success(render_tasks(&self.journal.view.tasks)),
            "run_case" => return self.run_case_tool(call),
            name => {
                let journal = &mut self.journal;
                let mut emit_err = None;
                let mut on_study = |ev: StudyEvent| {
                    if emit_err.is_none() {
                        if let Err(e) = journal.emit(EventKind::StudyProgress, json!({"event": ev})) {
                            emit_err = Some(e);
                        }
                    }
                };
                let o = dispatch_tool(&self.ctx, name, args, &mut on_study);
                if let Some(e) = emit_err {
                    return Err(e);
                }
                o
            }
        };
        self.emit_tool_result(call, &outcome)
    }

    pub fn task_create(&mut self, title: &str, depends_on: Vec<u64>) -> Result<TaskItem, OrchestratorError> {
        self.writable()?;
        let t = plan_create(&self.journal.view.tasks, title, depends_on)?;
        self.emit(EventKind::TaskChanged, json!({"task": t}))?;
        Ok(t)
    }

    pub fn task_update(&mut self, id: u64, status: TaskStatus) -> Result<TaskItem, OrchestratorError> {
        self.writable()?;
        let t = plan_update(&self.journal.view.tasks, id, status)?;
        self.emit(EventKind::TaskChanged, json!({"task": t}))?;
        Ok(t)
    }

    /// Launches `command` in `case` and waits, streaming progress events.
    fn launch(&mut self, case: &str, command: &str, attempt: u32) -> Result<RunRecord, OrchestratorError> {
        let run_id = format!("run-{}", self.journal.view.runs_finished + 1);
        let handle = launch_run(&self.ctx.policy, case, command, run_id.clone())
            .map_err(|e| OrchestratorError::Launch(e.to_string()))?
            .with_tail_lines(self.ctx.tail_lines);
        let journal = &mut self.journal;
        let mut emit_err = None;
        let record = handle.wait(|p| {
            if emit_err.is_none() {
                if let Err(e) = journal.emit(
                    EventKind::RunProgress,
                    json!({"run_id": run_id, "attempt": attempt, "progress": p}),
                ) {
                    emit_err = Some(e);
                }
            }
        });
        if let Some(e) = emit_err {
            return Err(e);
        }
        let record = relativize(&self.ctx.policy, record);
        self.emit(
            EventKind::RunFinished,
            json!({"run": record, "attempt": attempt, "max_attempts": self.config.correction.max_attempts}),
        )?;
        Ok(record)
    }

    fn feedback_for(&self, record: &RunRecord, attempt: u32) -> String {
        let log = std::fs::read_to_string(self.ctx.policy.root.join(&record.log_path)).unwrap_or_default();
        let tail = last_lines(&log, self.config.correction.include_log_tail_lines);
        feedback_text(record, attempt, self.config.correction.max_attempts, &tail)
    }

    fn run_case_tool(&mut self, call: &ToolCallRequest) -> Result<(), OrchestratorError> {
        let (case, command) = match (arg_str(&call.arguments, "case"), arg_str(&call.arguments, "command")) {
            (Ok(c), Ok(m)) => (c.to_string(), m.to_string()),
            (Err(o), _) | (_, Err(o)) => return self.emit_tool_result(call, &o),
        };
        let record = match self.launch(&case, &command, 1) {
            Ok(r) => r,
            Err(OrchestratorError::Launch(msg)) => {
                return self.emit_tool_result(call, &ToolOutcome::failure(ErrorKind::NotFound, msg));
            }
            Err(e) => return Err(e),
        };
        let text = self.feedback_for(&record, 1);
        if record.is_clean() {
            return self.emit_tool_result(call, &ToolOutcome::success(text));
        }
        let mut o = ToolOutcome::failure(ErrorKind::None, text);
        o.exit_code = record.exit_code;
        self.emit(
            EventKind::ToolResult,
            json!({"message": ChatMessage::tool(call.id.clone(), o.content.clone()), "outcome": outcome_summary(&o)}),
        )?;
        if self.config.correction.max_attempts <= 1 {
            return self.exhausted(&record, 1);
        }
        self.correction = Some(ActiveCorrection {
            case: record.case_root.display().to_string(),
            command,
            attempts: 1,
        });
        Ok(())
    }

    fn exhausted(&mut self, record: &RunRecord, attempts: u32) -> Result<(), OrchestratorError> {
        self.fail(
            format!("self-correction exhausted after {attempts} attempt(s)"),
            json!({"diagnostic": record.diagnostic, "run_id": record.id}),
        )?;
        Err(OrchestratorError::CorrectionExhausted {
            attempts,
            kind: record.diagnostic.kind,
        })
    }

    fn relaunch(&mut self) -> Result<(), OrchestratorError> {
        let Some(corr) = self.correction.clone() else { return Ok(()) };
        let attempt = corr.attempts + 1;
        let call = ToolCallRequest::new(
            format!("relaunch-{}", self.journal.view.runs_finished + 1),
            "run_case",
            json!({"case": corr.case, "command": corr.command}),
        );
        self.emit(EventKind::ToolCall, json!({"call": call, "attempt": attempt, "origin": "self_correction"}))?;
        self.iterations = 0;
        let record = match self.launch(&corr.case, &corr.command, attempt) {
            Ok(r) => r,
            Err(OrchestratorError::Launch(msg)) => {
                self.fail(format!("relaunch failed to start: {msg}"), json!({}))?;
                return Err(OrchestratorError::Launch(msg));
            }
            Err(e) => return Err(e),
        };
        let text = self.feedback_for(&record, attempt);
        if record.is_clean() {
            self.correction = None;
        } else if attempt >= self.config.correction.max_attempts {
            return self.exhausted(&record, attempt);
        } else {
            self.correction = Some(ActiveCorrection { attempts: attempt, ..corr });
        }
        self.emit(EventKind::UserMsg, json!({"message": ChatMessage::user(text), "origin": "feedback"}))?;
        Ok(())
    }

    /// Starts the correction cycle for a run that failed outside the loop.
    /// The given run counts as attempt 1.
    pub fn self_correct(&mut self, run: &RunRecord) -> Result<Vec<EventRecord>, OrchestratorError> {
        if run.is_clean() {
            return Err(OrchestratorError::NothingToCorrect);
        }
        self.expect_ready()?;
        let start = self.journal.log.len();
        let run = if run.case_root.is_absolute() { relativize(&self.ctx.policy, run.clone()) } else { run.clone() };
        if self.config.correction.max_attempts <= 1 {
            self.exhausted(&run, 1)?;
        }
        self.correction = Some(ActiveCorrection {
            case: run.case_root.display().to_string(),
            command: run.command.clone(),
            attempts: 1,
        });
        let text = self.feedback_for(&run, 1);
        self.emit(EventKind::UserMsg, json!({"message": ChatMessage::user(text), "origin": "feedback"}))?;
        self.iterations = 0;
        self.drive()?;
        Ok(self.since(start))
    }

    /// Runs a parameter study outside the model loop, e.g. on request of the
    /// researcher, streaming study events.
    pub fn run_study(&mut self, spec: &StudySpec) -> Result<(StudyResult, String), OrchestratorError> {
        self.expect_ready()?;
        let journal = &mut self.journal;
        let mut emit_err = None;
        let mut on_study = |ev: StudyEvent| {
            if emit_err.is_none() {
                if let Err(e) = journal.emit(EventKind::StudyProgress, json!({"event": ev})) {
                    emit_err = Some(e);
                }
            }
        };
        let out = run_study_with_report(&self.ctx, spec, &mut on_study);
        if let Some(e) = emit_err {
            return Err(e);
        }
        match out {
            Ok(r) => Ok(r),
            Err(msg) => {
                self.emit(EventKind::Error, json!({"message": msg, "fatal": false}))?;
                Err(OrchestratorError::Config(msg))
            }
        }
    }

    pub fn close(&mut self) -> Result<(), OrchestratorError> {
        self.writable()?;
        if self.state() != SessionState::Closed {
            let from = self.state();
            self.emit(EventKind::StateChanged, json!({"from": from, "to": SessionState::Closed}))?;
        }
        Ok(())
    }

    pub fn workdir(&self) -> &Path {
        &self.ctx.policy.root
    }
}
