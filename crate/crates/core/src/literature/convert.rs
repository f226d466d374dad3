use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::LiteratureError;
use crate::toolkit::{bash_exec, ErrorKind, SandboxPolicy, ToolError, ToolOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conversion {
    pub markdown: String,
    /// Root-relative path of the written markdown.
    pub output: String,
    pub command: String,
    pub outcome: ToolOutcome,
}

fn shell_quote(s: &str) -> String {
    if !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "/._-+".contains(c)) {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', "'\\''"))
    }
}

fn output_for(input: &Path) -> PathBuf {
    let md = input.with_extension("md");
    if md == input {
        input.with_extension("converted.md")
    } else {
        md
    }
}

/// Runs the converter template (placeholders `{input}` and `{output}`) in the
/// sandbox root. Without `{output}` the converter's stdout is the document.
pub fn convert_pdf(
    policy: &SandboxPolicy,
    input: impl AsRef<Path>,
    converter_command: Option<&str>,
) -> Result<Conversion, LiteratureError> {
    let template = converter_command.map(str::trim).filter(|c| !c.is_empty());
    let Some(template) = template else {
        return Err(LiteratureError::ConverterMissing("no converter command configured".into()));
    };
    let abs = policy.resolve(input.as_ref())?;
    if !abs.is_file() {
        return Err(ToolError::NotFound(input.as_ref().display().to_string()).into());
    }
    let out_abs = output_for(&abs);
    let in_rel = policy.relative(&abs);
    let out_rel = policy.relative(&out_abs);
    let writes_output = template.contains("{output}");
    let command = template
        .replace("{input}", &shell_quote(&in_rel))
        .replace("{output}", &shell_quote(&out_rel));
    let outcome = bash_exec(&command, ".", policy);
    match (outcome.error_kind, outcome.exit_code) {
        (ErrorKind::None, Some(0)) => {}
        (ErrorKind::None, Some(127)) => {
            return Err(LiteratureError::ConverterMissing(outcome.content.trim().to_string()))
        }
        (_, code) => {
            return Err(LiteratureError::ConverterFailed {
                exit_code: code,
                stderr: outcome.content,
            })
        }
    }
    let markdown = if writes_output {
        std::fs::read_to_string(&out_abs).map_err(|e| LiteratureError::ConverterFailed {
            exit_code: Some(0),
            stderr: format!("converter produced no output at {out_rel}: {e}"),
        })?
    } else {
        std::fs::write(&out_abs, &outcome.content)?;
        outcome.content.clone()
    };
    Ok(Conversion {
        markdown,
        output: out_rel,
        command,
        outcome,
    })
}
