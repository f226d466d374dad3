use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SECTIONS: [&str; 6] = ["geometry", "mesh", "boundary_conditions", "models", "solver", "tuning"];
const REQUIRED_SECTIONS: [&str; 3] = ["geometry", "boundary_conditions", "models"];
const QUOTE_WORDS: std::ops::RangeInclusive<usize> = 3..=30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Text(String),
}

impl std::fmt::Display for ParamValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamValue::Number(n) => f.write_str(&crate::foamdict::format_number(*n)),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamItem {
    pub name: String,
    pub value: ParamValue,
    pub units: String,
    pub provenance_quote: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParameterSheet {
    pub paper_id: String,
    pub geometry: Vec<ParamItem>,
    pub mesh: Vec<ParamItem>,
    pub boundary_conditions: Vec<ParamItem>,
    pub models: Vec<ParamItem>,
    pub solver: Vec<ParamItem>,
    pub tuning: Vec<ParamItem>,
}

impl ParameterSheet {
    /// Sections in schema order with their names.
    pub fn sections(&self) -> [(&'static str, &[ParamItem]); 6] {
        [
            ("geometry", &self.geometry),
            ("mesh", &self.mesh),
            ("boundary_conditions", &self.boundary_conditions),
            ("models", &self.models),
            ("solver", &self.solver),
            ("tuning", &self.tuning),
        ]
    }

    pub fn item_count(&self) -> usize {
        self.sections().iter().map(|(_, items)| items.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("parameter sheet has {} violation(s): {}", .0.len(), summarize(.0))]
pub struct SchemaViolations(pub Vec<Violation>);

fn summarize(v: &[Violation]) -> String {
    v.iter().map(|x| format!("{}: {}", x.path, x.reason)).collect::<Vec<_>>().join("; ")
}

fn push(v: &mut Vec<Violation>, path: String, reason: &str) {
    v.push(Violation {
        path,
        reason: reason.to_string(),
    });
}

/// Checks a sheet document and reports every violation with its path
/// (`models[1].provenance_quote`, `geometry`, ...).
pub fn validate_sheet(doc: &Value) -> Result<ParameterSheet, SchemaViolations> {
    let mut v = Vec::new();
    let Some(obj) = doc.as_object() else {
        return Err(SchemaViolations(vec![Violation {
            path: "$".into(),
            reason: "sheet must be an object".into(),
        }]));
    };
    match obj.get("paper_id").and_then(Value::as_str) {
        Some(s) if !s.trim().is_empty() => {}
        _ => push(&mut v, "paper_id".into(), "must be a non-empty string"),
    }
    let mut sheet = ParameterSheet {
        paper_id: obj.get("paper_id").and_then(Value::as_str).unwrap_or_default().to_string(),
        ..Default::default()
    };
    for section in SECTIONS {
        let items = match obj.get(section) {
            None | Some(Value::Null) => {
                if REQUIRED_SECTIONS.contains(&section) {
                    push(&mut v, section.into(), "section is required and must be non-empty");
                }
                continue;
            }
            Some(Value::Array(a)) => a,
            Some(_) => {
                push(&mut v, section.into(), "section must be a list");
                continue;
            }
        };
        if items.is_empty() && REQUIRED_SECTIONS.contains(&section) {
            push(&mut v, section.into(), "section is required and must be non-empty");
        }
        let mut parsed = Vec::new();
        for (i, item) in items.iter().enumerate() {
            let at = |field: &str| format!("{section}[{i}].{field}");
            let Some(o) = item.as_object() else {
                push(&mut v, format!("{section}[{i}]"), "item must be an object");
                continue;
            };
            let before = v.len();
            let name = o.get("name").and_then(Value::as_str).unwrap_or_default();
            if name.trim().is_empty() {
                push(&mut v, at("name"), "must be a non-empty string");
            }
            let value = match o.get("value") {
                Some(Value::Number(n)) => match n.as_f64().filter(|x| x.is_finite()) {
                    Some(x) => Some(ParamValue::Number(x)),
                    None => {
                        push(&mut v, at("value"), "number must be finite");
                        None
                    }
                },
                Some(Value::String(s)) if !s.trim().is_empty() => Some(ParamValue::Text(s.clone())),
                _ => {
                    push(&mut v, at("value"), "must be a number or a non-empty string");
                    None
                }
            };
            let units = o.get("units").and_then(Value::as_str).unwrap_or_default();
            if units.trim().is_empty() {
                push(&mut v, at("units"), "must be a unit string or \"-\"");
            }
            let quote = o.get("provenance_quote").and_then(Value::as_str).unwrap_or_default();
            let words = quote.split_whitespace().count();
            if quote.trim().is_empty() {
                push(&mut v, at("provenance_quote"), "must be non-empty");
            } else if !QUOTE_WORDS.contains(&words) {
                push(&mut v, at("provenance_quote"), "must be 3 to 30 words");
            }
            if v.len() == before {
                parsed.push(ParamItem {
                    name: name.to_string(),
                    value: value.expect("checked above"),
                    units: units.to_string(),
                    provenance_quote: quote.to_string(),
                });
            }
        }
        let slot = match section {
            "geometry" => &mut sheet.geometry,
            "mesh" => &mut sheet.mesh,
            "boundary_conditions" => &mut sheet.boundary_conditions,
            "models" => &mut sheet.models,
            "solver" => &mut sheet.solver,
            _ => &mut sheet.tuning,
        };
        *slot = parsed;
    }
    if v.is_empty() {
        Ok(sheet)
    } else {
        Err(SchemaViolations(v))
    }
}
