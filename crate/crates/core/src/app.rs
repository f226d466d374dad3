//! Runtime configuration shared by the command-line front end, the gateway
//! and the examples: where the workdir, skills and tutorials live, which
//! model provider to use and how sessions behave.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::gateway::{SessionParts, SessionStore, StoreError, StoreSink};
use crate::llm::{build_provider, load_script, ChatProvider, ProviderConfig, ProviderKind};
use crate::orchestrator::{CorrectionPolicy, EventRecord, Session, SessionConfig, ToolContext, DEFAULT_LOOP_BUDGET};
use crate::runmgr::stub;
use crate::skills::{discover_skills, SkillRegistry};
use crate::toolkit::SandboxPolicy;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {reason}")]
    File { path: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub workdir: PathBuf,
    pub skills_dir: Option<PathBuf>,
    pub tutorials_root: Option<PathBuf>,
    pub converter: Option<String>,
    pub mapping_table: Option<PathBuf>,
    pub auto_approve: bool,
    pub auto_skills: bool,
    pub max_attempts: u32,
    pub log_tail_lines: usize,
    pub loop_budget: usize,
    pub shell_timeout_secs: u64,
    /// Extra directories searched first for solver executables.
    pub solver_path: Vec<PathBuf>,
    /// Install the bundled stand-in solver as `stubFoam` under the workdir.
    pub stub_solver: bool,
    /// Executable behind the stand-in solver; defaults to the running binary,
    /// which must call `runmgr::stub::dispatch_if_requested` first thing.
    pub stub_exe: Option<PathBuf>,
    pub provider: ProviderConfig,
    pub script: Option<PathBuf>,
    /// Defaults to `<workdir>/.flamepilot/sessions`.
    pub sessions_dir: Option<PathBuf>,
    pub bind: String,
}

impl Default for AppConfig {
    fn default() -> Self {
        let correction = CorrectionPolicy::default();
        Self {
            workdir: PathBuf::from("."),
            skills_dir: None,
            tutorials_root: None,
            converter: None,
            mapping_table: None,
            auto_approve: false,
            auto_skills: false,
            max_attempts: correction.max_attempts,
            log_tail_lines: correction.include_log_tail_lines,
            loop_budget: DEFAULT_LOOP_BUDGET,
            shell_timeout_secs: 120,
            solver_path: Vec::new(),
            stub_solver: false,
            stub_exe: None,
            provider: ProviderConfig::scripted(),
            script: None,
            sessions_dir: None,
            bind: crate::gateway::DEFAULT_BIND.to_string(),
        }
    }
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let err = |reason: String| ConfigError::File {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        toml::from_str(&text).map_err(|e| err(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_attempts == 0 {
            return Err(ConfigError::Invalid("max_attempts must be at least 1".into()));
        }
        if self.loop_budget == 0 {
            return Err(ConfigError::Invalid("loop_budget must be at least 1".into()));
        }
        if self.shell_timeout_secs == 0 {
            return Err(ConfigError::Invalid("shell_timeout_secs must be positive".into()));
        }
        if self.provider.kind == ProviderKind::Scripted && self.script.is_none() {
            return Err(ConfigError::Invalid("the scripted provider needs a script file".into()));
        }
        self.provider.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn sessions_dir(&self) -> PathBuf {
        self.sessions_dir
            .clone()
            .unwrap_or_else(|| self.workdir.join(".flamepilot").join("sessions"))
    }

    pub fn policy(&self) -> Result<SandboxPolicy, ConfigError> {
        std::fs::create_dir_all(&self.workdir)
            .map_err(|e| ConfigError::Invalid(format!("workdir {}: {e}", self.workdir.display())))?;
        let mut policy = SandboxPolicy::new(&self.workdir)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?
            .with_timeout(Duration::from_secs(self.shell_timeout_secs));
        if self.stub_solver {
            let bin = policy.root.join(".flamepilot").join("bin");
            let exe = match &self.stub_exe {
                Some(p) => p.clone(),
                None => std::env::current_exe().map_err(|e| ConfigError::Invalid(format!("current executable: {e}")))?,
            };
            stub::install(&bin, &exe, &["stub-solver"]).map_err(|e| ConfigError::Invalid(format!("stub install: {e}")))?;
            policy = policy.with_path_prefix(bin);
        }
        for dir in &self.solver_path {
            policy = policy.with_path_prefix(dir.clone());
        }
        Ok(policy)
    }

    pub fn skills(&self) -> Result<SkillRegistry, ConfigError> {
        match &self.skills_dir {
            None => Ok(SkillRegistry::default()),
            Some(dir) => {
                let reg = discover_skills(dir).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                for w in &reg.warnings {
                    tracing::warn!("skill skipped: {}: {}", w.path, w.reason);
                }
                Ok(reg)
            }
        }
    }

    pub fn tool_context(&self) -> Result<ToolContext, ConfigError> {
        let mut ctx = ToolContext::new(self.policy()?);
        ctx.skills = Arc::new(self.skills()?);
        ctx.tutorials_root = self.tutorials_root.clone();
        ctx.converter = self.converter.clone();
        ctx.mapping_table = self.mapping_table.clone();
        ctx.tail_lines = self.log_tail_lines;
        Ok(ctx)
    }

    pub fn session_config(&self) -> SessionConfig {
        SessionConfig {
            auto_approve: self.auto_approve,
            correction: CorrectionPolicy {
                max_attempts: self.max_attempts,
                include_log_tail_lines: self.log_tail_lines,
            },
            loop_budget: self.loop_budget,
            auto_skills: self.auto_skills,
            ..SessionConfig::default()
        }
    }

    pub fn provider(&self) -> Result<Box<dyn ChatProvider>, ConfigError> {
        let script = match (&self.provider.kind, &self.script) {
            (ProviderKind::Scripted, Some(path)) => Some(load_script(path).map_err(|e| ConfigError::File {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?),
            _ => None,
        };
        build_provider(&self.provider, script).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn session_parts(&self) -> Result<SessionParts, ConfigError> {
        self.validate()?;
        Ok((self.provider()?, self.tool_context()?, self.session_config()))
    }
}

/// Opens (or creates) session `id` in the configured store, replaying its
/// log. A corrupt log opens read-only over the readable prefix; the second
/// value reports that.
pub fn open_session(config: &AppConfig, id: &str) -> Result<(Session, bool), String> {
    let store = Arc::new(SessionStore::open(config.sessions_dir()).map_err(|e| e.to_string())?);
    if !store.exists(id) {
        store.create_session(id).map_err(|e| e.to_string())?;
    }
    let (replayed, read_only) = match store.replay(id) {
        Ok(r) => (r, false),
        Err(StoreError::CorruptLog { partial, .. }) => (*partial, true),
        Err(e) => return Err(e.to_string()),
    };
    let (provider, ctx, cfg) = config.session_parts().map_err(|e| e.to_string())?;
    let sink = StoreSink {
        store,
        id: id.to_string(),
        then: |_: &EventRecord| {},
    };
    let mut session = Session::resume(replayed.view, replayed.records, provider, ctx, cfg).with_sink(Box::new(sink));
    session.set_read_only(read_only);
    Ok((session, read_only))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let text = r#"
            workdir = "/tmp/w"
            auto_approve = true
            max_attempts = 3
            script = "s.json"
            [provider]
            kind = "scripted"
        "#;
        let c: AppConfig = toml::from_str(text).unwrap();
        assert_eq!(c.max_attempts, 3);
        assert!(c.auto_approve);
        assert_eq!(c.loop_budget, DEFAULT_LOOP_BUDGET);
        c.validate().unwrap();
        assert!(toml::from_str::<AppConfig>("bogus = 1").is_err());
        let bad = AppConfig { max_attempts: 0, ..c };
        assert!(bad.validate().is_err());
    }
}
