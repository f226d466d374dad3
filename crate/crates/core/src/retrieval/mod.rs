//! Tutorial lookup by direct literal search over case trees.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::foamdict::{read_dict, FoamValue};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseMatch {
    /// Relative to the tutorials root, `/`-separated.
    pub case_root: String,
    pub score: usize,
    /// Matching line count per pattern; only patterns with hits appear.
    pub matched: BTreeMap<String, usize>,
    pub solver_hint: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("no case directories under {0}")]
    NoTutorials(String),
    #[error("at least one non-empty pattern is required")]
    EmptyPatterns,
}

pub fn owns_control_dict(dir: &Path) -> bool {
    dir.join("system").join("controlDict").is_file()
}

fn rel_string(root: &Path, p: &Path) -> String {
    let rel = p.strip_prefix(root).unwrap_or(p);
    let s = rel
        .components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/");
    if s.is_empty() {
        ".".into()
    } else {
        s
    }
}

/// Every directory under `root` (inclusive) that owns `system/controlDict`.
pub fn case_dirs(root: &Path) -> Vec<PathBuf> {
    WalkDir::new(root)
        .follow_links(false)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_dir() && owns_control_dict(e.path()))
        .map(|e| e.into_path())
        .collect()
}

fn solver_hint(case: &Path) -> Option<String> {
    let f = read_dict(&case.join("system").join("controlDict")).ok()?;
    match f.body.get("application")? {
        FoamValue::Token(t) => Some(t.clone()),
        FoamValue::Str(s) => Some(s.clone()),
        _ => None,
    }
}

/// Ranks cases by how many distinct patterns occur in their files. A file
/// belongs to its nearest enclosing case.
pub fn find_cases(tutorials_root: &Path, patterns: &[String], max_results: usize) -> Result<Vec<CaseMatch>, RetrievalError> {
    let patterns: Vec<&String> = patterns.iter().filter(|p| !p.is_empty()).collect();
    if patterns.is_empty() {
        return Err(RetrievalError::EmptyPatterns);
    }
    let cases = case_dirs(tutorials_root);
    if cases.is_empty() {
        return Err(RetrievalError::NoTutorials(tutorials_root.display().to_string()));
    }
    let mut counts: BTreeMap<PathBuf, BTreeMap<String, usize>> = BTreeMap::new();
    for entry in WalkDir::new(tutorials_root).follow_links(false).into_iter().filter_map(Result::ok) {
        if !entry.file_type().is_file() {
            continue;
        }
        let Some(owner) = entry.path().ancestors().skip(1).find(|a| cases.iter().any(|c| c == a)) else {
            continue;
        };
        let Ok(bytes) = std::fs::read(entry.path()) else { continue };
        if crate::toolkit::is_binary(&bytes) {
            continue;
        }
        let text = String::from_utf8_lossy(&bytes);
        let slot = counts.entry(owner.to_path_buf()).or_default();
        for line in text.lines() {
            for p in &patterns {
                if line.contains(p.as_str()) {
                    *slot.entry((*p).clone()).or_default() += 1;
                }
            }
        }
    }
    let mut out: Vec<CaseMatch> = counts
        .into_iter()
        .filter(|(_, m)| !m.is_empty())
        .map(|(case, matched)| CaseMatch {
            case_root: rel_string(tutorials_root, &case),
            score: matched.len(),
            solver_hint: solver_hint(&case),
            matched,
        })
        .collect();
    out.sort_by(|a, b| {
        b.score
            .cmp(&a.score)
            .then(a.case_root.len().cmp(&b.case_root.len()))
            .then(a.case_root.cmp(&b.case_root))
    });
    out.truncate(max_results);
    Ok(out)
}
