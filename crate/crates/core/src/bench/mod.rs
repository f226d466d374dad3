//! Benchmark scoring: executability, point-by-point NMSE against reference
//! fields, success, and suite-level aggregation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::foamdict::{parse_field, FieldData, FoamDictError};
use crate::runmgr::{run_to_completion, DiagnosticKind};
use crate::toolkit::SandboxPolicy;

pub const DEFAULT_THRESHOLD: f64 = 0.1;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NmseError {
    #[error("point counts differ: sim {sim}, ref {reference}")]
    SizeMismatch { sim: usize, reference: usize },
    #[error("reference field is identically zero")]
    ZeroReference,
    #[error("only scalar fields can be compared")]
    NotScalar,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("no outcomes to aggregate")]
    EmptySuite,
    #[error("invalid suite: {0}")]
    InvalidSuite(String),
    #[error(transparent)]
    Nmse(#[from] NmseError),
    #[error(transparent)]
    Dict(#[from] FoamDictError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Σ(sim−ref)² / Σref². A uniform field is expanded to its partner's size.
pub fn compute_nmse(sim: &FieldData, reference: &FieldData) -> Result<f64, NmseError> {
    let n_sim = sim.internal.len().ok_or(NmseError::NotScalar)?;
    let n_ref = reference.internal.len().ok_or(NmseError::NotScalar)?;
    let (a, b) = match (&sim.internal, &reference.internal) {
        (crate::foamdict::InternalField::Uniform(_), _) => (sim.internal.expand(n_ref), reference.internal.expand(n_ref)),
        (_, crate::foamdict::InternalField::Uniform(_)) => (sim.internal.expand(n_sim), reference.internal.expand(n_sim)),
        _ => (sim.internal.expand(n_sim), reference.internal.expand(n_ref)),
    };
    let (a, b) = (a.ok_or(NmseError::NotScalar)?, b.ok_or(NmseError::NotScalar)?);
    nmse_values(&a, &b)
}

pub fn nmse_values(sim: &[f64], reference: &[f64]) -> Result<f64, NmseError> {
    if sim.len() != reference.len() {
        return Err(NmseError::SizeMismatch {
            sim: sim.len(),
            reference: reference.len(),
        });
    }
    let den: f64 = reference.iter().map(|r| r * r).sum();
    if den == 0.0 {
        return Err(NmseError::ZeroReference);
    }
    let num: f64 = sim.iter().zip(reference).map(|(s, r)| (s - r) * (s - r)).sum();
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCase {
    pub id: String,
    pub query: String,
    pub reference_dir: PathBuf,
    pub run_command: String,
    /// Case to evaluate; defaults to `bench/<id>` under the sandbox root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceManifest {
    pub time: String,
    pub fields: Vec<String>,
}

impl ReferenceManifest {
    pub fn load(reference_dir: &Path) -> Result<Self, BenchError> {
        let path = reference_dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let m: ReferenceManifest = serde_json::from_str(&text)?;
        if m.fields.is_empty() {
            return Err(BenchError::InvalidSuite(format!("{} lists no fields", path.display())));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub id: String,
    pub executable: bool,
    pub nmse: Option<f64>,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<DiagnosticKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CaseOutcome {
    /// Applies the threshold rule to recorded executability and NMSE.
    pub fn scored(id: impl Into<String>, executable: bool, nmse: Option<f64>, threshold: f64) -> Self {
        let nmse = if executable { nmse } else { None };
        Self {
            id: id.into(),
            executable,
            nmse,
            success: executable && nmse.is_some_and(|x| x <= threshold),
            diagnostic: None,
            note: None,
        }
    }
}

fn field_at(dir: &Path, time: &str, name: &str) -> Result<FieldData, BenchError> {
    let path = dir.join(time).join(name);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    Ok(parse_field(&text)?)
}

/// Runs the case, then compares every manifest field at the manifest time.
/// Failures of any kind end up as a non-executable or unscored outcome.
pub fn evaluate_case(policy: &SandboxPolicy, case_dir: &Path, bench: &BenchCase, threshold: f64) -> CaseOutcome {
    let mut out = CaseOutcome::scored(bench.id.clone(), false, None, threshold);
    let record = match run_to_completion(policy, case_dir, &bench.run_command, format!("bench-{}", bench.id), 60, |_| {}) {
        Ok(r) => r,
        Err(e) => {
            out.note = Some(e.to_string());
            return out;
        }
    };
    out.diagnostic = Some(record.diagnostic.kind);
    if !record.is_clean() {
        out.note = Some(record.diagnostic.excerpt.lines().last().unwrap_or_default().to_string());
        return out;
    }
    out.executable = true;
    let case_abs = record.case_root.clone();
    let scored = (|| -> Result<f64, BenchError> {
        let ref_dir = policy.resolve(&bench.reference_dir).map_err(|e| BenchError::InvalidSuite(e.to_string()))?;
        let manifest = ReferenceManifest::load(&ref_dir)?;
        let mut total = 0.0;
        for f in &manifest.fields {
            let sim = field_at(&case_abs, &manifest.time, f)?;
            let reference = field_at(&ref_dir, &manifest.time, f)?;
            total += compute_nmse(&sim, &reference)?;
        }
        Ok(total / manifest.fields.len() as f64)
    })();
    match scored {
        Ok(nmse) => {
            out.nmse = Some(nmse);
            out.success = nmse <= threshold;
        }
        Err(e) => out.note = Some(e.to_string()),
    }
    out
}

pub fn load_suite(path: &Path) -> Result<Vec<BenchCase>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let suite: Vec<BenchCase> = serde_json::from_str(&text)?;
    let mut ids = std::collections::BTreeSet::new();
    for c in &suite {
        if !ids.insert(c.id.as_str()) {
            return Err(BenchError::InvalidSuite(format!("duplicate case id '{}'", c.id)));
        }
    }
    Ok(suite)
}

pub fn run_suite(policy: &SandboxPolicy, suite: &[BenchCase], threshold: f64) -> Vec<CaseOutcome> {
    suite
        .iter()
        .map(|c| {
            let dir = c.case_dir.clone().unwrap_or_else(|| PathBuf::from("bench").join(&c.id));
            evaluate_case(policy, &dir, c, threshold)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub m_exec: f64,
    pub m_nmse: f64,
    pub success_rate: f64,
    pub n_cases: usize,
    pub threshold: f64,
    pub n_exec: usize,
    pub n_nmse: usize,
    pub n_success: usize,
}

pub fn aggregate(outcomes: &[CaseOutcome], threshold: f64) -> Result<BenchSummary, BenchError> {
    if outcomes.is_empty() {
        return Err(BenchError::EmptySuite);
    }
    let n = outcomes.len();
    let n_exec = outcomes.iter().filter(|o| o.executable).count();
    let n_nmse = outcomes.iter().filter(|o| o.nmse.is_some_and(|x| x <= threshold)).count();
    let n_success = outcomes.iter().filter(|o| o.success).count();
    Ok(BenchSummary {
        m_exec: n_exec as f64 / n as f64,
        m_nmse: n_nmse as f64 / n as f64,
        success_rate: n_success as f64 / n as f64,
        n_cases: n,
        threshold,
        n_exec,
        n_nmse,
        n_success,
    })
}

/// count/n rounded half-up to three decimals, computed in integers so the
/// rounding is exact.
pub fn display_ratio(count: usize, n: usize) -> String {
    assert!(n > 0, "ratio of an empty suite");
    let thousandths = (2 * count as u128 * 1000 + n as u128) / (2 * n as u128);
    format!("{}.{:03}", thousandths / 1000, thousandths % 1000)
}

impl BenchSummary {
    pub fn display_exec(&self) -> String {
        display_ratio(self.n_exec, self.n_cases)
    }

    pub fn display_nmse(&self) -> String {
        display_ratio(self.n_nmse, self.n_cases)
    }

    pub fn display_success(&self) -> String {
        display_ratio(self.n_success, self.n_cases)
    }

    pub fn render_table(&self, outcomes: &[CaseOutcome]) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<24} {:>10} {:>12} {:>8}", "case", "executable", "nmse", "success");
        for o in outcomes {
            let nmse = o.nmse.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(s, "{:<24} {:>10} {:>12} {:>8}", o.id, o.executable, nmse, o.success);
        }
        let _ = writeln!(s, "{}", "-".repeat(57));
        let _ = writeln!(s, "{:<24} {:>10}", "M_exec", self.display_exec());
        let _ = writeln!(s, "{:<24} {:>10}", "M_nmse", self.display_nmse());
        let _ = writeln!(s, "{:<24} {:>10}", "success_rate", self.display_success());
        let _ = writeln!(s, "{:<24} {:>10}", "cases", self.n_cases);
        let _ = writeln!(s, "{:<24} {:>10}", "nmse_threshold", crate::foamdict::format_number(self.threshold));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foamdict::InternalField;

    fn field(v: InternalField) -> FieldData {
        FieldData {
            dimensions: [0; 7],
            internal: v,
            boundary: Default::default(),
        }
    }

    #[test]
    fn nmse_examples() {
        let a = field(InternalField::Nonuniform(vec![1.0, 2.0]));
        let b = field(InternalField::Nonuniform(vec![2.0, 2.0]));
        assert_eq!(compute_nmse(&a, &a).unwrap(), 0.0);
        assert_eq!(compute_nmse(&a, &b).unwrap(), 0.125);
        let five = field(InternalField::Nonuniform(vec![1.0; 5]));
        let four = field(InternalField::Nonuniform(vec![1.0; 4]));
        assert_eq!(compute_nmse(&five, &four), Err(NmseError::SizeMismatch { sim: 5, reference: 4 }));
        let zero = field(InternalField::Uniform(0.0));
        assert_eq!(compute_nmse(&a, &zero), Err(NmseError::ZeroReference));
        let u2 = field(InternalField::Uniform(2.0));
        assert_eq!(compute_nmse(&a, &u2).unwrap(), 0.125);
    }

    #[test]
    fn aggregate_rules() {
        assert!(matches!(aggregate(&[], 0.1), Err(BenchError::EmptySuite)));
        let outs = vec![
            CaseOutcome::scored("a", true, Some(0.05), 0.1),
            CaseOutcome::scored("b", true, Some(0.125), 0.1),
            CaseOutcome::scored("c", false, Some(0.0), 0.1),
        ];
        assert!(!outs[1].success && outs[1].executable);
        assert_eq!(outs[2].nmse, None);
        let s = aggregate(&outs, 0.1).unwrap();
        assert_eq!((s.n_exec, s.n_nmse, s.n_success), (2, 1, 1));
        assert_eq!(s.m_exec, 2.0 / 3.0);
    }

    #[test]
    fn display_rounding_half_up() {
        assert_eq!(display_ratio(7, 16), "0.438");
        assert_eq!(display_ratio(16, 16), "1.000");
        assert_eq!(display_ratio(1, 8), "0.125");
        assert_eq!(display_ratio(1, 2000), "0.001");
        assert_eq!(display_ratio(0, 3), "0.000");
        assert_eq!(display_ratio(2, 3), "0.667");
    }
}
