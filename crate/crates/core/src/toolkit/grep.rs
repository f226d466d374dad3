use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::fs::is_binary;
use super::{SandboxPolicy, ToolError};

pub const DEFAULT_MAX_HITS: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GrepHit {
    pub path: String,
    pub line_number: usize,
    pub line_text: String,
}

enum Matcher {
    Literal(String),
    Regex(Regex),
}

impl Matcher {
    fn is_match(&self, line: &str) -> bool {
        match self {
            Matcher::Literal(s) => line.contains(s.as_str()),
            Matcher::Regex(r) => r.is_match(line),
        }
    }
}

/// Searches regular files under `path`, skipping binaries and symlinks.
/// Hits come back ordered by (root-relative path, line number).
pub fn grep_search(
    policy: &SandboxPolicy,
    pattern: &str,
    path: impl AsRef<Path>,
    literal: bool,
    max_hits: usize,
) -> Result<Vec<GrepHit>, ToolError> {
    if pattern.is_empty() {
        return Err(ToolError::BadPattern("pattern must be non-empty".into()));
    }
    let matcher = if literal {
        Matcher::Literal(pattern.to_string())
    } else {
        Matcher::Regex(Regex::new(pattern).map_err(|e| ToolError::BadPattern(e.to_string()))?)
    };
    let abs = policy.resolve(path.as_ref())?;
    if !abs.exists() {
        return Err(ToolError::NotFound(path.as_ref().display().to_string()));
    }
    let mut hits = Vec::new();
    for entry in WalkDir::new(&abs).follow_links(false) {
        let Ok(entry) = entry else { continue };
        if !entry.file_type().is_file() {
            continue;
        }
        let Ok(bytes) = std::fs::read(entry.path()) else { continue };
        if is_binary(&bytes) {
            continue;
        }
        let rel = policy.relative(entry.path());
        let text = String::from_utf8_lossy(&bytes);
        for (i, line) in text.lines().enumerate() {
            if matcher.is_match(line) {
                hits.push(GrepHit {
                    path: rel.clone(),
                    line_number: i + 1,
                    line_text: line.to_string(),
                });
            }
        }
    }
    hits.sort_by(|a, b| (&a.path, a.line_number).cmp(&(&b.path, b.line_number)));
    hits.truncate(max_hits);
    Ok(hits)
}

/// `path:line:text` rendering used in tool results.
pub fn format_hits(hits: &[GrepHit]) -> String {
    hits.iter()
        .map(|h| format!("{}:{}:{}\n", h.path, h.line_number, h.line_text))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree() -> (tempfile::TempDir, SandboxPolicy) {
        let dir = tempfile::tempdir().unwrap();
        let p = SandboxPolicy::new(dir.path()).unwrap();
        std::fs::create_dir_all(p.root.join("case/constant")).unwrap();
        std::fs::write(
            p.root.join("case/constant/turbulenceProperties"),
            "simulationType RAS;\nRAS { model kEpsilon; }\n",
        )
        .unwrap();
        std::fs::write(p.root.join("a.txt"), "x\nx\n").unwrap();
        std::fs::write(p.root.join("b.txt"), "x\n").unwrap();
        std::fs::write(p.root.join("bin"), b"x\0x").unwrap();
        (dir, p)
    }

    #[test]
    fn absent_pattern_gives_nothing() {
        let (_d, p) = tree();
        assert!(grep_search(&p, "nothingHere", ".", true, 10).unwrap().is_empty());
    }

    #[test]
    fn single_literal_hit() {
        let (_d, p) = tree();
        let hits = grep_search(&p, "kEpsilon", ".", true, 10).unwrap();
        assert_eq!(
            hits,
            vec![GrepHit {
                path: "case/constant/turbulenceProperties".into(),
                line_number: 2,
                line_text: "RAS { model kEpsilon; }".into()
            }]
        );
    }

    #[test]
    fn cap_keeps_first_in_order() {
        let (_d, p) = tree();
        let all = grep_search(&p, "x", ".", true, 10).unwrap();
        assert_eq!(all.len(), 3, "binary file skipped");
        let one = grep_search(&p, "x", ".", true, 1).unwrap();
        assert_eq!((one[0].path.as_str(), one[0].line_number), ("a.txt", 1));
    }

    #[test]
    fn bad_regex_and_denied_paths() {
        let (_d, p) = tree();
        assert!(matches!(grep_search(&p, "(", ".", false, 1), Err(ToolError::BadPattern(_))));
        assert!(grep_search(&p, "(", ".", true, 1).unwrap().is_empty());
        assert!(matches!(grep_search(&p, "x", "..", true, 1), Err(ToolError::Denied(_))));
        assert_eq!(grep_search(&p, "k[A-Z]psilon", ".", false, 5).unwrap().len(), 1);
    }
}
