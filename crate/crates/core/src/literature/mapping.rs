use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sheet::{ParamValue, ParameterSheet};
use crate::foamdict::{parse_value, FoamValue, KeyPath};
use crate::study::{coerce_value, ParameterEdit};

/// One `<name-glob> → <dict_file>:<key_path>` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingRule {
    pub pattern: String,
    pub dict_file: String,
    pub key_path: KeyPath,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MappingTable {
    pub rules: Vec<MappingRule>,
}

#[derive(Debug, thiserror::Error)]
pub enum MappingError {
    #[error("mapping table line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl MappingTable {
    pub fn parse(text: &str) -> Result<Self, MappingError> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: &str| MappingError::Syntax {
                line: i + 1,
                reason: reason.to_string(),
            };
            let (lhs, rhs) = line
                .split_once('→')
                .or_else(|| line.split_once("->"))
                .ok_or_else(|| err("expected '<name-glob> → <dict_file>:<key_path>'"))?;
            let (file, key) = rhs.trim().split_once(':').ok_or_else(|| err("target needs <dict_file>:<key_path>"))?;
            let pattern = lhs.trim();
            if pattern.is_empty() || file.trim().is_empty() {
                return Err(err("empty pattern or dict file"));
            }
            let key_path: KeyPath = key.trim().parse().map_err(|_| err("invalid key path"))?;
            rules.push(MappingRule {
                pattern: pattern.to_string(),
                dict_file: file.trim().to_string(),
                key_path,
            });
        }
        Ok(Self { rules })
    }

    pub fn load(path: &Path) -> Result<Self, MappingError> {
        let text = std::fs::read_to_string(path).map_err(|source| MappingError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// First rule whose glob matches the item name, case-insensitively.
    pub fn lookup(&self, name: &str) -> Option<&MappingRule> {
        self.rules.iter().find(|r| glob_match(&r.pattern.to_lowercase(), &name.to_lowercase()))
    }
}

/// `*` matches any run of characters, `?` exactly one.
pub fn glob_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    let (mut pi, mut ti) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '?' || p[pi] == t[ti]) {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == '*' {
            star = Some((pi, ti));
            pi += 1;
        } else if let Some((sp, st)) = star {
            pi = sp + 1;
            ti = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '*')
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChecklistItem {
    Edit {
        section: String,
        name: String,
        edit: ParameterEdit,
    },
    Requirement {
        section: String,
        name: String,
        detail: String,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CaseChecklist {
    pub items: Vec<ChecklistItem>,
}

impl CaseChecklist {
    pub fn edits(&self) -> impl Iterator<Item = &ParameterEdit> {
        self.items.iter().filter_map(|i| match i {
            ChecklistItem::Edit { edit, .. } => Some(edit),
            _ => None,
        })
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (n, item) in self.items.iter().enumerate() {
            match item {
                ChecklistItem::Edit { section, name, edit } => s.push_str(&format!(
                    "{n:>2}. [edit] {section}/{name}: {} {} = {}\n",
                    edit.dict_file,
                    edit.key_path,
                    edit.value.render_inline()
                )),
                ChecklistItem::Requirement { section, name, detail } => {
                    s.push_str(&format!("{n:>2}. [need] {section}/{name}: {detail}\n"))
                }
            }
        }
        s
    }
}

fn to_foam(v: &ParamValue) -> FoamValue {
    match v {
        ParamValue::Number(n) => FoamValue::Number(*n),
        ParamValue::Text(s) => parse_value(s).unwrap_or_else(|_| FoamValue::Str(s.clone())),
    }
}

/// One checklist entry per sheet item: an edit where the mapping table knows
/// the name, otherwise a requirement carrying the item as written.
pub fn sheet_to_checklist(sheet: &ParameterSheet, table: &MappingTable) -> CaseChecklist {
    let mut items = Vec::new();
    for (section, entries) in sheet.sections() {
        for item in entries {
            match table.lookup(&item.name) {
                Some(rule) => {
                    let value = coerce_value(&rule.dict_file, &rule.key_path, to_foam(&item.value));
                    items.push(ChecklistItem::Edit {
                        section: section.to_string(),
                        name: item.name.clone(),
                        edit: ParameterEdit::new(rule.dict_file.clone(), rule.key_path.clone(), value),
                    });
                }
                None => {
                    let units = if item.units == "-" { String::new() } else { format!(" {}", item.units) };
                    items.push(ChecklistItem::Requirement {
                        section: section.to_string(),
                        name: item.name.clone(),
                        detail: format!("{}{units}", item.value),
                    });
                }
            }
        }
    }
    CaseChecklist { items }
}
