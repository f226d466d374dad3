use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Danger {
    Safe,
    Destructive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    String,
    Integer,
    Number,
    Boolean,
    StringList,
    /// Any JSON value.
    Any,
    Object,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ParamType,
    pub required: bool,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub params: Vec<ParamSpec>,
    pub danger: Danger,
}

impl ToolSpec {
    pub fn new(name: &str, description: &str, danger: Danger) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            params: Vec::new(),
            danger,
        }
    }

    pub fn param(mut self, name: &str, ty: ParamType, required: bool, description: &str) -> Self {
        self.params.push(ParamSpec {
            name: name.into(),
            ty,
            required,
            description: description.into(),
        });
        self
    }

    /// JSON-schema object describing the parameters.
    pub fn parameters_schema(&self) -> Value {
        let mut props = serde_json::Map::new();
        let mut required = Vec::new();
        for p in &self.params {
            let schema = match p.ty {
                ParamType::String => json!({"type": "string"}),
                ParamType::Integer => json!({"type": "integer"}),
                ParamType::Number => json!({"type": "number"}),
                ParamType::Boolean => json!({"type": "boolean"}),
                ParamType::StringList => json!({"type": "array", "items": {"type": "string"}}),
                ParamType::Object => json!({"type": "object"}),
                ParamType::Any => json!({}),
            };
            let mut schema = schema.as_object().cloned().unwrap_or_default();
            schema.insert("description".into(), Value::String(p.description.clone()));
            props.insert(p.name.clone(), Value::Object(schema));
            if p.required {
                required.push(Value::String(p.name.clone()));
            }
        }
        json!({"type": "object", "properties": props, "required": required})
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("tool '{0}' registered twice")]
pub struct DuplicateTool(pub String);

/// Tool specs keyed by unique name, iterated in registration order.
#[derive(Debug, Clone, Default)]
pub struct ToolRegistry {
    order: Vec<String>,
    specs: BTreeMap<String, ToolSpec>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, spec: ToolSpec) -> Result<(), DuplicateTool> {
        if self.specs.contains_key(&spec.name) {
            return Err(DuplicateTool(spec.name));
        }
        self.order.push(spec.name.clone());
        self.specs.insert(spec.name.clone(), spec);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ToolSpec> {
        self.specs.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ToolSpec> {
        self.order.iter().map(|n| &self.specs[n])
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// `{name, description, params}` list handed to the model.
    pub fn export(&self) -> Value {
        Value::Array(
            self.iter()
                .map(|s| json!({"name": s.name, "description": s.description, "params": s.parameters_schema()}))
                .collect(),
        )
    }
}

pub fn atomic_tool_specs() -> Vec<ToolSpec> {
    use ParamType::*;
    vec![
        ToolSpec::new("read_file", "Read a text file under the workdir, optionally a line window (1-based offset_line, limit_lines; default first 2000 lines).", Danger::Safe)
            .param("path", String, true, "File path relative to the workdir")
            .param("offset_line", Integer, false, "First line to return, 1-based")
            .param("limit_lines", Integer, false, "Maximum number of lines"),
        ToolSpec::new("write_file", "Write a text file under the workdir. mode is create (fails if present), overwrite or append.", Danger::Destructive)
            .param("path", String, true, "File path relative to the workdir")
            .param("content", String, true, "Text to write")
            .param("mode", String, false, "create | overwrite | append (default overwrite)"),
        ToolSpec::new("list_dir", "List a directory as an indented tree; directories end with '/'.", Danger::Safe)
            .param("path", String, false, "Directory relative to the workdir (default '.')")
            .param("depth", Integer, false, "Levels to descend (default 2)"),
        ToolSpec::new("grep_search", "Search file contents under a path. Hits are 'path:line:text' ordered by path then line.", Danger::Safe)
            .param("pattern", String, true, "Text or regular expression")
            .param("path", String, false, "Directory or file to search (default '.')")
            .param("literal", Boolean, false, "Treat pattern as literal text (default true)")
            .param("max_hits", Integer, false, "Maximum hits (default 200)"),
        ToolSpec::new("bash_exec", "Run a shell command in the workdir with a timeout; stdout and stderr are combined.", Danger::Destructive)
            .param("command", String, true, "Shell command")
            .param("cwd", String, false, "Working directory relative to the workdir (default '.')"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_rejects_duplicates() {
        let mut r = ToolRegistry::new();
        for s in atomic_tool_specs() {
            r.register(s).unwrap();
        }
        assert_eq!(r.len(), 5);
        assert!(r.register(ToolSpec::new("read_file", "", Danger::Safe)).is_err());
    }

    #[test]
    fn writers_are_destructive() {
        for s in atomic_tool_specs() {
            let expect = matches!(s.name.as_str(), "write_file" | "bash_exec");
            assert_eq!(s.danger == Danger::Destructive, expect, "{}", s.name);
        }
    }

    #[test]
    fn export_shape() {
        let mut r = ToolRegistry::new();
        r.register(atomic_tool_specs().remove(0)).unwrap();
        let v = r.export();
        assert_eq!(v[0]["name"], "read_file");
        assert_eq!(v[0]["params"]["required"], json!(["path"]));
        assert_eq!(v[0]["params"]["properties"]["offset_line"]["type"], "integer");
    }
}
