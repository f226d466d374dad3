//! Skill bundles: a `skill.md` with front matter, plus optional `resources/`
//! and `scripts/` directories beside it.
//!
//! ```text
//! ---
//! name: openfoam
//! description: Case layout and dictionary conventions.
//! triggers: openfoam, controlDict, blockMesh
//! ---
//! body...
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

pub const MANIFEST_FILE: &str = "skill.md";
pub const MAX_DESCRIPTION: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillManifest {
    pub name: String,
    pub description: String,
    pub triggers: Vec<String>,
    pub body: String,
    /// Paths relative to the registry root.
    pub resources: Vec<String>,
    pub scripts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestError {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SkillError {
    #[error("unknown skill '{0}'")]
    UnknownSkill(String),
    #[error("skills root {0} does not exist")]
    MissingRoot(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SkillRegistry {
    pub root: PathBuf,
    pub skills: BTreeMap<String, SkillManifest>,
    pub warnings: Vec<ManifestError>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
}

/// Splits a manifest into (front-matter pairs, body).
pub fn parse_manifest(text: &str) -> Result<(BTreeMap<String, String>, String), String> {
    let mut lines = text.split_inclusive('\n');
    match lines.next() {
        Some(l) if l.trim_end_matches(['\n', '\r']) == "---" => {}
        _ => return Err("missing front matter: first line must be ---".into()),
    }
    let mut fields = BTreeMap::new();
    let mut closed = false;
    for line in lines.by_ref() {
        let line = line.trim_end_matches(['\n', '\r']);
        if line == "---" {
            closed = true;
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            return Err(format!("front matter line without ':': {line}"));
        };
        if key.is_empty() || key.chars().any(|c| !c.is_ascii_lowercase() && c != '_') {
            return Err(format!("front matter key must be lowercase: {key}"));
        }
        if fields.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(format!("duplicate front matter key: {key}"));
        }
    }
    if !closed {
        return Err("front matter is not closed by ---".into());
    }
    Ok((fields, lines.collect()))
}

fn bundled_files(root: &Path, dir: &Path) -> Vec<String> {
    if !dir.is_dir() {
        return Vec::new();
    }
    let mut out: Vec<String> = WalkDir::new(dir)
        .follow_links(false)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .filter_map(|e| {
            let rel = e.path().strip_prefix(root).ok()?;
            Some(rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"))
        })
        .collect();
    out.sort();
    out
}

fn load_manifest(root: &Path, dir: &Path) -> Result<SkillManifest, String> {
    let text = std::fs::read_to_string(dir.join(MANIFEST_FILE)).map_err(|e| e.to_string())?;
    let (fields, body) = parse_manifest(&text)?;
    let name = fields.get("name").cloned().ok_or("missing 'name'")?;
    if !valid_name(&name) {
        return Err(format!("invalid name '{name}' (allowed: a-z 0-9 -)"));
    }
    let description = fields.get("description").cloned().ok_or("missing 'description'")?;
    if description.chars().count() > MAX_DESCRIPTION {
        return Err(format!("description longer than {MAX_DESCRIPTION} characters"));
    }
    let triggers = fields
        .get("triggers")
        .map(|t| {
            t.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect()
        })
        .unwrap_or_default();
    let body = body.trim_start_matches(['\n', '\r']).to_string();
    if body.trim().is_empty() {
        return Err("empty body".into());
    }
    Ok(SkillManifest {
        name,
        description,
        triggers,
        body,
        resources: bundled_files(root, &dir.join("resources")),
        scripts: bundled_files(root, &dir.join("scripts")),
    })
}

/// Loads every `<root>/<dir>/skill.md`. Broken manifests become warnings.
pub fn discover_skills(root: &Path) -> Result<SkillRegistry, SkillError> {
    if !root.is_dir() {
        return Err(SkillError::MissingRoot(root.display().to_string()));
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|_| SkillError::MissingRoot(root.display().to_string()))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_dir() && p.join(MANIFEST_FILE).is_file())
        .collect();
    dirs.sort();
    let mut reg = SkillRegistry {
        root: root.to_path_buf(),
        ..Default::default()
    };
    for dir in dirs {
        let rel = format!(
            "{}/{MANIFEST_FILE}",
            dir.file_name().unwrap_or_default().to_string_lossy()
        );
        match load_manifest(root, &dir) {
            Ok(m) if reg.skills.contains_key(&m.name) => reg.warnings.push(ManifestError {
                path: rel,
                reason: format!("duplicate skill name '{}'", m.name),
            }),
            Ok(m) => {
                reg.skills.insert(m.name.clone(), m);
            }
            Err(reason) => reg.warnings.push(ManifestError { path: rel, reason }),
        }
    }
    Ok(reg)
}

fn trigger_regex(trigger: &str) -> Regex {
    let pat = format!(r"(?i)(?:^|[^\w]){}(?:$|[^\w])", regex::escape(trigger));
    Regex::new(&pat).expect("escaped trigger is a valid regex")
}

/// Number of distinct triggers of `skill` found as whole words in `query`.
pub fn trigger_hits(skill: &SkillManifest, query: &str) -> usize {
    let distinct: BTreeSet<String> = skill.triggers.iter().map(|t| t.to_lowercase()).collect();
    distinct.iter().filter(|t| trigger_regex(t).is_match(query)).count()
}

impl SkillRegistry {
    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.skills.keys().map(String::as_str).collect()
    }

    /// One line per skill, always present in the system context.
    pub fn index(&self) -> String {
        if self.skills.is_empty() {
            return "(no skills installed)".into();
        }
        self.skills
            .values()
            .map(|s| format!("- {}: {}", s.name, s.description))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

pub fn match_skills(registry: &SkillRegistry, query: &str) -> Vec<String> {
    let mut scored: Vec<(usize, &str)> = registry
        .skills
        .values()
        .map(|s| (trigger_hits(s, query), s.name.as_str()))
        .filter(|(n, _)| *n > 0)
        .collect();
    scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
    scored.into_iter().map(|(_, n)| n.to_string()).collect()
}

pub fn load_skill(registry: &SkillRegistry, name: &str) -> Result<String, SkillError> {
    let s = registry
        .skills
        .get(name)
        .ok_or_else(|| SkillError::UnknownSkill(name.to_string()))?;
    let mut block = format!("<<< skill: {} >>>\n", s.name);
    let list = |label: &str, items: &[String]| {
        if items.is_empty() {
            format!("{label}: (none)\n")
        } else {
            format!("{label}:\n{}", items.iter().map(|p| format!("  - {p}\n")).collect::<String>())
        }
    };
    block.push_str(&list("resources", &s.resources));
    block.push_str(&list("scripts", &s.scripts));
    block.push_str("---\n");
    block.push_str(&s.body);
    if !s.body.ends_with('\n') {
        block.push('\n');
    }
    block.push_str(&format!("<<< end skill: {} >>>\n", s.name));
    Ok(block)
}
