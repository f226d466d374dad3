//! Case cloning, dictionary edits, parameter sweeps and profile comparison.

mod case;
mod profile;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use case::{apply_edit, check_case_relative, clone_case, coerce_value, is_case, ParameterEdit};
pub use profile::{
    compare_profiles, extract_profile, parse_profile_text, ComparisonReport, ProfileAxis, ProfileSample,
    COORDINATE_FIELD,
};

use crate::foamdict::{FoamDictError, FoamValue, KeyPath};
use crate::runmgr::{run_to_completion, RunError, RunRecord, SolverProgress};
use crate::toolkit::{SandboxPolicy, ToolError};

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error("{0} is not a case (no system/controlDict)")]
    NotACase(String),
    #[error("destination {0} already exists")]
    DestinationExists(String),
    #[error("invalid study spec: {0}")]
    InvalidSpec(String),
    #[error("field file {0} not found")]
    FieldMissing(String),
    #[error("profile has no comparable samples")]
    EmptyProfile,
    #[error("line {line}: {reason}")]
    BadData { line: usize, reason: String },
    #[error(transparent)]
    Dict(#[from] FoamDictError),
    #[error(transparent)]
    Sandbox(#[from] ToolError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Optional post-processing: compare `field` at time `time` of every clean
/// member against an experimental profile file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSpec {
    pub field: String,
    pub time: String,
    pub experimental: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub base_case: PathBuf,
    pub dict_file: String,
    pub key_path: KeyPath,
    pub values: Vec<FoamValue>,
    pub run_command: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSpec>,
}

impl StudySpec {
    pub fn validate(&self) -> Result<(), StudyError> {
        if self.values.is_empty() {
            return Err(StudyError::InvalidSpec("values must be non-empty".into()));
        }
        let label_ok = !self.label.is_empty()
            && self.label.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
            && !self.label.starts_with('.');
        if !label_ok {
            return Err(StudyError::InvalidSpec(format!(
                "label '{}' must use letters, digits, '-', '_' or '.'",
                self.label
            )));
        }
        if self.run_command.trim().is_empty() {
            return Err(StudyError::InvalidSpec("run_command must be non-empty".into()));
        }
        check_case_relative(&self.dict_file)
    }

    pub fn edit_for(&self, value: &FoamValue) -> ParameterEdit {
        ParameterEdit::new(self.dict_file.clone(), self.key_path.clone(), value.clone())
    }

    pub fn member_name(&self, index: usize) -> String {
        format!("{}-{index}", self.label)
    }
}

/// Progress notifications while a study runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum StudyEvent {
    MemberStarted { label: String, index: usize, value: FoamValue, case_dir: String },
    RunStep { label: String, index: usize, progress: SolverProgress },
    MemberFinished { label: String, index: usize, result: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyMember {
    pub index: usize,
    pub value: FoamValue,
    /// Relative to the sandbox root.
    pub case_dir: String,
    pub run: Option<RunRecord>,
    pub error: Option<String>,
    pub profile: Option<Vec<ProfileSample>>,
    pub comparison: Option<ComparisonReport>,
}

impl StudyMember {
    /// Diagnostic kind of the run, or `error` when it never ran.
    pub fn result(&self) -> String {
        match &self.run {
            Some(r) => r.diagnostic.kind.to_string(),
            None => "error".to_string(),
        }
    }

    pub fn is_clean(&self) -> bool {
        self.run.as_ref().is_some_and(RunRecord::is_clean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub label: String,
    pub dict_file: String,
    pub key_path: KeyPath,
    pub members: Vec<StudyMember>,
    pub variable: Option<String>,
    pub experimental: Option<Vec<ProfileSample>>,
}

impl StudyResult {
    pub fn render_table(&self) -> String {
        let mut s = format!("study {}: {} {}\n", self.label, self.dict_file, self.key_path);
        let _ = writeln!(s, "{:>5}  {:<16}  {:<24}  {:>12}  {:>6}  {:>7}", "index", "value", "result", "rms_error", "points", "clipped");
        for m in &self.members {
            let (rms, pts, clip) = match &m.comparison {
                Some(c) => (format!("{:.4}", c.rms_error), c.n_points.to_string(), c.n_clipped.to_string()),
                None => ("-".into(), "-".into(), "-".into()),
            };
            let _ = writeln!(
                s,
                "{:>5}  {:<16}  {:<24}  {:>12}  {:>6}  {:>7}",
                m.index,
                m.value.render_inline(),
                m.result(),
                rms,
                pts,
                clip
            );
        }
        s
    }
}

/// Rewrites the record's paths relative to the sandbox root.
pub fn relativize(policy: &SandboxPolicy, mut rec: RunRecord) -> RunRecord {
    rec.case_root = PathBuf::from(policy.relative(&rec.case_root));
    rec.log_path = PathBuf::from(policy.relative(&rec.log_path));
    rec
}

/// Runs every value of the sweep in its own cloned case, one after another.
/// Member failures are recorded and never stop the remaining members.
pub fn run_study(
    spec: &StudySpec,
    policy: &SandboxPolicy,
    studies_root: &Path,
    tail_lines: usize,
    mut on_event: impl FnMut(StudyEvent),
) -> Result<StudyResult, StudyError> {
    spec.validate()?;
    let base = policy.resolve(&spec.base_case)?;
    if !is_case(&base) {
        return Err(StudyError::NotACase(spec.base_case.display().to_string()));
    }
    let studies_root = policy.resolve(studies_root)?;
    let study_dir = studies_root.join(&spec.label);
    if study_dir.exists() {
        return Err(StudyError::DestinationExists(policy.relative(&study_dir)));
    }
    let experimental = match &spec.compare {
        Some(c) => {
            let path = policy.resolve(&c.experimental)?;
            Some(parse_profile_text(&std::fs::read_to_string(path)?)?)
        }
        None => None,
    };
    std::fs::create_dir_all(&study_dir)?;

    let mut members = Vec::with_capacity(spec.values.len());
    for (index, value) in spec.values.iter().enumerate() {
        let name = spec.member_name(index);
        let dest = study_dir.join(&name);
        let case_dir = policy.relative(&dest);
        on_event(StudyEvent::MemberStarted {
            label: spec.label.clone(),
            index,
            value: value.clone(),
            case_dir: case_dir.clone(),
        });
        let mut member = StudyMember {
            index,
            value: value.clone(),
            case_dir,
            run: None,
            error: None,
            profile: None,
            comparison: None,
        };
        let prepared = clone_case(&base, &dest).and_then(|_| apply_edit(&dest, &spec.edit_for(value)));
        match prepared {
            Err(e) => member.error = Some(e.to_string()),
            Ok(_) => {
                let label = spec.label.clone();
                let ran = run_to_completion(policy, &dest, &spec.run_command, name, tail_lines, |p| {
                    on_event(StudyEvent::RunStep {
                        label: label.clone(),
                        index,
                        progress: p.clone(),
                    })
                });
                match ran {
                    Ok(rec) => member.run = Some(relativize(policy, rec)),
                    Err(e) => member.error = Some(e.to_string()),
                }
            }
        }
        if let (Some(c), Some(exp), true) = (&spec.compare, &experimental, member.is_clean()) {
            let compared = extract_profile(&dest, &c.field, ProfileAxis::ByIndex, &c.time)
                .and_then(|sim| compare_profiles(&c.field, &sim, exp).map(|r| (sim, r)));
            match compared {
                Ok((sim, report)) => {
                    member.profile = Some(sim);
                    member.comparison = Some(report);
                }
                Err(e) => member.error = Some(format!("comparison failed: {e}")),
            }
        }
        on_event(StudyEvent::MemberFinished {
            label: spec.label.clone(),
            index,
            result: member.result(),
        });
        members.push(member);
    }
    Ok(StudyResult {
        label: spec.label.clone(),
        dict_file: spec.dict_file.clone(),
        key_path: spec.key_path.clone(),
        members,
        variable: spec.compare.as_ref().map(|c| c.field.clone()),
        experimental,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        let mut spec = StudySpec {
            base_case: "base".into(),
            dict_file: "0/k".into(),
            key_path: "boundaryField/inlet/value".parse().unwrap(),
            values: vec![],
            run_command: "stubFoam".into(),
            label: "k-sweep".into(),
            compare: None,
        };
        assert!(matches!(spec.validate(), Err(StudyError::InvalidSpec(_))));
        spec.values = vec![1.0.into()];
        spec.validate().unwrap();
        spec.label = "../x".into();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn spec_document_shape() {
        let doc = r#"{"base_case": "cases/jhc", "dict_file": "constant/turbulenceProperties",
            "key_path": "RAS/kEpsilonCoeffs/C1", "values": [1.44, 1.6], "run_command": "stubFoam", "label": "c1"}"#;
        let spec: StudySpec = serde_json::from_str(doc).unwrap();
        assert_eq!(spec.values, vec![FoamValue::Number(1.44), FoamValue::Number(1.6)]);
        assert_eq!(spec.member_name(1), "c1-1");
    }
}
