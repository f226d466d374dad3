//! The bundled mini-MILD walkthrough. A fixture paper about a jet in hot
//! coflow becomes a parameter sheet, a configured case, a corrected run and
//! a three-value parameter study, all driven by a scripted model against the
//! stand-in solver.

use std::path::{Path, PathBuf};

use crate::app::{open_session, AppConfig};
use crate::llm::ProviderConfig;
use crate::orchestrator::Session;

pub const PROMPT: &str = "Reproduce the jet-in-hot-coflow case in papers/jhc-mild.pdf, \
    get it running, then study how the inlet turbulent kinetic energy changes the temperature profile.";

pub const SCRIPT: &str = "scripts/mini-mild.json";
pub const CASE_DIR: &str = "cases/jhc";
pub const STUDY_LABEL: &str = "k-inlet";

/// Fixture directory of this crate.
pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Copies the paper, mapping table and experimental profile into `workdir`.
pub fn prepare_workdir(fixtures: &Path, workdir: &Path) -> std::io::Result<()> {
    for rel in ["papers/jhc-mild.pdf", "mapping/jhc.map", "experimental/jhc-T-30mm.dat"] {
        let dst = workdir.join(rel);
        if let Some(parent) = dst.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::copy(fixtures.join(rel), dst)?;
    }
    Ok(())
}

/// Configuration for the walkthrough: identity converter, fixture skills and
/// base case, auto-approval and the scripted provider.
pub fn config(fixtures: &Path, workdir: &Path, stub_exe: Option<PathBuf>) -> AppConfig {
    AppConfig {
        workdir: workdir.to_path_buf(),
        skills_dir: Some(fixtures.join("skills")),
        tutorials_root: Some(fixtures.join("cases")),
        converter: Some("cp {input} {output}".into()),
        mapping_table: Some(workdir.join("mapping/jhc.map")),
        auto_approve: true,
        stub_solver: true,
        stub_exe,
        provider: ProviderConfig::scripted(),
        script: Some(fixtures.join(SCRIPT)),
        ..AppConfig::default()
    }
}

/// Prepares `workdir` and runs the whole scenario as one user turn.
pub fn run(fixtures: &Path, workdir: &Path, stub_exe: Option<PathBuf>, session_id: &str) -> Result<Session, String> {
    prepare_workdir(fixtures, workdir).map_err(|e| e.to_string())?;
    let cfg = config(fixtures, workdir, stub_exe);
    let (mut session, _) = open_session(&cfg, session_id)?;
    session.run_turn(PROMPT).map_err(|e| e.to_string())?;
    Ok(session)
}
