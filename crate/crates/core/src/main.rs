use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use flamepilot::app::AppConfig;
use flamepilot::bench::{aggregate, load_suite, run_suite, CaseOutcome, DEFAULT_THRESHOLD};
use flamepilot::gateway::{generate_token, serve, Gateway, SessionFactory, SessionStore};
use flamepilot::llm::ProviderKind;
use flamepilot::orchestrator::{run_study_with_report, EventKind, EventRecord, Session, SessionState, Verdict};
use flamepilot::runmgr::{run_to_completion, stub};
use flamepilot::study::{relativize, StudySpec};

#[derive(Parser)]
#[command(name = "flamepilot", version, about = "Configure, run and self-correct CFD cases with a tool-using model")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML configuration file; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    #[arg(long, global = true)]
    skills_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    tutorials_root: Option<PathBuf>,
    /// Paper converter template with {input} and {output} placeholders.
    #[arg(long, global = true)]
    converter: Option<String>,
    #[arg(long, global = true)]
    mapping_table: Option<PathBuf>,
    #[arg(long, global = true)]
    auto_approve: bool,
    #[arg(long, global = true)]
    max_attempts: Option<u32>,
    #[arg(long, global = true, value_enum)]
    provider: Option<ProviderArg>,
    /// Reply script for the scripted provider.
    #[arg(long, global = true)]
    script: Option<PathBuf>,
    #[arg(long, global = true)]
    endpoint: Option<String>,
    #[arg(long, global = true)]
    model: Option<String>,
    /// Install the bundled stand-in solver as `stubFoam`.
    #[arg(long, global = true)]
    stub_solver: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    Remote,
    Scripted,
}

#[derive(Subcommand)]
enum Command {
    /// Interactive session on stdin/stdout.
    Chat {
        /// Resume or create this session id.
        #[arg(long)]
        session: Option<String>,
        /// Send this message instead of reading stdin; repeatable.
        #[arg(long = "message", short = 'm')]
        messages: Vec<String>,
    },
    /// Run a case once and hand a failed run to the self-correction loop.
    Run {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        command: String,
        /// Report the run without starting a correction session.
        #[arg(long)]
        no_correct: bool,
    },
    /// Score a benchmark suite.
    Bench {
        #[arg(long)]
        suite: Option<PathBuf>,
        /// Score recorded outcomes instead of running cases.
        #[arg(long, conflicts_with = "suite")]
        outcomes: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
    },
    /// Run a parameter study from a JSON spec.
    Study {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Serve the HTTP gateway on a loopback address.
    Serve {
        #[arg(long)]
        bind: Option<SocketAddr>,
        #[arg(long)]
        allow_remote: bool,
        /// Bearer token; generated when absent.
        #[arg(long, env = "FLAMEPILOT_TOKEN", hide_env_values = true)]
        token: Option<String>,
    },
}

fn load_config(g: &Global) -> Result<AppConfig, String> {
    let mut c = match &g.config {
        Some(p) => AppConfig::load(p).map_err(|e| e.to_string())?,
        None => AppConfig::default(),
    };
    if let Some(w) = &g.workdir {
        c.workdir = w.clone();
    }
    if g.skills_dir.is_some() {
        c.skills_dir = g.skills_dir.clone();
    }
    if g.tutorials_root.is_some() {
        c.tutorials_root = g.tutorials_root.clone();
    }
    if g.converter.is_some() {
        c.converter = g.converter.clone();
    }
    if g.mapping_table.is_some() {
        c.mapping_table = g.mapping_table.clone();
    }
    c.auto_approve |= g.auto_approve;
    c.stub_solver |= g.stub_solver;
    if let Some(n) = g.max_attempts {
        c.max_attempts = n;
    }
    match g.provider {
        Some(ProviderArg::Scripted) => c.provider.kind = ProviderKind::Scripted,
        Some(ProviderArg::Remote) => c.provider.kind = ProviderKind::Remote,
        None => {}
    }
    if g.script.is_some() {
        c.script = g.script.clone();
    }
    if g.endpoint.is_some() {
        c.provider.endpoint = g.endpoint.clone();
    }
    if let Some(m) = &g.model {
        c.provider.model_id = m.clone();
    }
    Ok(c)
}

fn clip(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

fn describe(rec: &EventRecord) -> Option<String> {
    let p = &rec.payload;
    let text = |v: &Value| v.get("text").and_then(Value::as_str).unwrap_or_default().to_string();
    match rec.kind {
        EventKind::AssistantMsg => {
            let m = &p["message"];
            let mut s = text(m);
            for c in m.get("tool_calls").and_then(Value::as_array).into_iter().flatten() {
                s.push_str(&format!("\n  -> {} {}", c["tool_name"].as_str().unwrap_or("?"), clip(&c["arguments"].to_string(), 160)));
            }
            Some(format!("assistant: {}", s.trim_start()))
        }
        EventKind::ToolResult => {
            let t = text(&p["message"]);
            let first = t.lines().next().unwrap_or_default();
            Some(format!("  <- {first}"))
        }
        EventKind::UserMsg if p["origin"] == "feedback" => Some(format!("[feedback] {}", text(&p["message"]).lines().next().unwrap_or_default())),
        EventKind::ApprovalRequested => Some(format!(
            "approval needed [{}]: {} {}",
            p["approval"]["id"].as_str().unwrap_or("?"),
            p["approval"]["tool_call"]["tool_name"].as_str().unwrap_or("?"),
            p["approval"]["tool_call"]["arguments"]
        )),
        EventKind::RunFinished => Some(format!(
            "run {} finished: {}",
            p["run"]["id"].as_str().unwrap_or("?"),
            p["run"]["diagnostic"]["kind"].as_str().unwrap_or("?")
        )),
        EventKind::Error => Some(format!("error: {}", p["message"].as_str().unwrap_or("?"))),
        _ => None,
    }
}

fn print_events(events: &[EventRecord]) {
    for e in events {
        if let Some(line) = describe(e) {
            println!("{line}");
        }
    }
}

fn open_session(config: &AppConfig, id: &str) -> Result<Session, String> {
    let (session, read_only) = flamepilot::app::open_session(config, id)?;
    if read_only {
        eprintln!("warning: the log of session {id} is corrupt; opened read-only");
    }
    Ok(session)
}

/// Prompts for every pending approval until none remain.
fn settle_approvals(session: &mut Session, input: &mut dyn BufRead) -> Result<(), String> {
    while session.state() == SessionState::AwaitingApproval {
        let Some(req) = session.view().pending_approvals.first().cloned() else { break };
        print!("approve {} {}? [y/N, or a note to deny] ", req.tool_call.tool_name, req.tool_call.arguments);
        std::io::stdout().flush().ok();
        let mut line = String::new();
        input.read_line(&mut line).map_err(|e| e.to_string())?;
        let answer = line.trim();
        let (verdict, note) = match answer {
            "y" | "yes" => (Verdict::Approve, ""),
            "" | "n" | "no" => (Verdict::Deny, "declined"),
            note => (Verdict::Deny, note),
        };
        let events = session.resolve_approval(&req.id, verdict, note).map_err(|e| e.to_string())?;
        print_events(&events);
    }
    Ok(())
}

fn chat(config: &AppConfig, session_id: Option<String>, messages: Vec<String>) -> Result<(), String> {
    let id = session_id.unwrap_or_else(|| format!("chat-{}", flamepilot::runmgr::now_ms()));
    let mut session = open_session(config, &id)?;
    eprintln!("session {id} ({:?})", session.state());
    let stdin = std::io::stdin();
    let mut input = stdin.lock();
    let turn = |session: &mut Session, text: &str, input: &mut dyn BufRead| -> Result<(), String> {
        let before = session.log().len();
        let result = session.run_turn(text);
        print_events(&session.log()[before..]);
        result.map_err(|e| e.to_string())?;
        settle_approvals(session, input)
    };
    if !messages.is_empty() {
        for m in &messages {
            turn(&mut session, m, &mut input)?;
        }
        return Ok(());
    }
    loop {
        print!("> ");
        std::io::stdout().flush().ok();
        let mut line = String::new();
        if input.read_line(&mut line).map_err(|e| e.to_string())? == 0 {
            break;
        }
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if text == "/quit" {
            session.close().map_err(|e| e.to_string())?;
            break;
        }
        if let Err(e) = turn(&mut session, text, &mut input) {
            eprintln!("error: {e}");
            if matches!(session.state(), SessionState::Failed | SessionState::Closed) {
                return Err(e);
            }
        }
    }
    Ok(())
}

fn run_once(config: &AppConfig, case: PathBuf, command: String, no_correct: bool) -> Result<bool, String> {
    let policy = config.policy().map_err(|e| e.to_string())?;
    let record = run_to_completion(&policy, &case, &command, "run-0", config.log_tail_lines, |p| {
        eprintln!("time {} step {}", p.latest_time, p.steps_completed)
    })
    .map_err(|e| e.to_string())?;
    let record = relativize(&policy, record);
    println!("{}: {}", record.id, record.diagnostic.kind);
    if record.is_clean() {
        return Ok(true);
    }
    println!("{}", record.diagnostic.excerpt.trim_end());
    if no_correct {
        return Ok(false);
    }
    let mut session = open_session(config, &format!("run-{}", flamepilot::runmgr::now_ms()))?;
    let out = session.self_correct(&record);
    print_events(session.log());
    let stdin = std::io::stdin();
    settle_approvals(&mut session, &mut stdin.lock())?;
    out.map_err(|e| e.to_string())?;
    let fixed = session
        .log()
        .iter()
        .rev()
        .find(|r| r.kind == EventKind::RunFinished)
        .is_some_and(|r| r.payload["run"]["diagnostic"]["kind"] == "clean_exit");
    Ok(fixed)
}

fn bench(config: &AppConfig, suite: Option<PathBuf>, outcomes: Option<PathBuf>, threshold: f64) -> Result<(), String> {
    let outcomes: Vec<CaseOutcome> = match (suite, outcomes) {
        (_, Some(path)) => {
            let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            let recorded: Vec<CaseOutcome> = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            recorded
                .into_iter()
                .map(|o| CaseOutcome { note: o.note.clone(), diagnostic: o.diagnostic, ..CaseOutcome::scored(o.id, o.executable, o.nmse, threshold) })
                .collect()
        }
        (Some(path), None) => {
            let cases = load_suite(&path).map_err(|e| e.to_string())?;
            let policy = config.policy().map_err(|e| e.to_string())?;
            run_suite(&policy, &cases, threshold)
        }
        (None, None) => return Err("bench needs --suite or --outcomes".into()),
    };
    let summary = aggregate(&outcomes, threshold).map_err(|e| e.to_string())?;
    print!("{}", summary.render_table(&outcomes));
    Ok(())
}

fn study(config: &AppConfig, spec_path: PathBuf) -> Result<(), String> {
    let text = std::fs::read_to_string(&spec_path).map_err(|e| format!("{}: {e}", spec_path.display()))?;
    let spec: StudySpec = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", spec_path.display()))?;
    let ctx = config.tool_context().map_err(|e| e.to_string())?;
    let mut on_event = |ev| eprintln!("{}", serde_json::to_string(&ev).unwrap_or_default());
    let (result, report) = run_study_with_report(&ctx, &spec, &mut on_event)?;
    print!("{}", result.render_table());
    println!("report: {report}");
    Ok(())
}

fn serve_cmd(config: AppConfig, bind: Option<SocketAddr>, allow_remote: bool, token: Option<String>) -> Result<(), String> {
    config.validate().map_err(|e| e.to_string())?;
    let addr: SocketAddr = match bind {
        Some(a) => a,
        None => config.bind.parse().map_err(|e| format!("bind address '{}': {e}", config.bind))?,
    };
    let store = Arc::new(SessionStore::open(config.sessions_dir()).map_err(|e| e.to_string())?);
    let token = token.unwrap_or_else(generate_token);
    let factory_config = config.clone();
    let factory: Arc<dyn SessionFactory> = Arc::new(move |_id: &str| factory_config.session_parts().map_err(|e| e.to_string()));
    let gateway = Gateway::new(store, token.clone(), factory);
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async move {
        println!("listening on http://{addr}");
        println!("token: {token}");
        serve(gateway, addr, allow_remote).await.map_err(|e| e.to_string())
    })
}

fn main() -> ExitCode {
    stub::dispatch_if_requested();
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_env("FLAMEPILOT_LOG").unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let config = match load_config(&cli.global) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Chat { session, messages } => chat(&config, session, messages).map(|_| true),
        Command::Run { case, command, no_correct } => run_once(&config, case, command, no_correct),
        Command::Bench { suite, outcomes, threshold } => bench(&config, suite, outcomes, threshold).map(|_| true),
        Command::Study { spec } => study(&config, spec).map(|_| true),
        Command::Serve { bind, allow_remote, token } => serve_cmd(config, bind, allow_remote, token).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
