//! OpenFOAM-style dictionary and scalar field files.
//!
//! The grammar covers keywords, `;`-terminated entries, nested `{ }`
//! dictionaries, `( )` and `[ ]` lists with optional length prefixes, quoted
//! strings, `//` and `/* */` comments (kept as trivia on the following
//! entry), `#include`-style directives and `#{ ... #}` code blocks. Macro
//! expansion is not performed.

mod field;
mod parser;
mod path;
mod serialize;
mod value;

use std::fmt;
use std::path::Path;

pub use field::{field_from_file, parse_field, FieldData, InternalField};
pub use parser::{parse_dict, parse_dict_bytes};
pub use path::{get_path, set_path, set_path_in_place, KeyPath};
pub use serialize::{render_value, serialize_dict};
pub use value::{
    format_number, looks_numeric, FoamDict, FoamEntry, FoamFile, FoamList, FoamValue, ListDelim,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: expected {}", self.line, self.column, self.expected)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, thiserror::Error)]
pub enum FoamDictError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("path not found (resolved prefix: '{resolved}')")]
    PathNotFound { resolved: String },
    #[error("path conflict: '{at}' is not a dictionary")]
    PathConflict { at: String },
    #[error("nonuniform list declares {declared} values but contains {actual}")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("invalid field file: {0}")]
    InvalidField(String),
    #[error("invalid key path '{0}'")]
    InvalidPath(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Parses a dictionary value written inline, e.g. `uniform (0 0 10)` or `1.6`.
pub fn parse_value(text: &str) -> Result<FoamValue, FoamDictError> {
    let f = parse_dict(&format!("v {text};"))?;
    match f.body.entries.as_slice() {
        [e] if e.keyword == "v" => Ok(e.value.clone()),
        _ => Err(FoamDictError::Parse(ParseError {
            line: 1,
            column: 1,
            expected: "a single value".into(),
        })),
    }
}

pub fn read_dict(path: &Path) -> Result<FoamFile, FoamDictError> {
    let bytes = std::fs::read(path).map_err(|source| FoamDictError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut f = parse_dict_bytes(&bytes)?;
    f.source_path = Some(path.to_path_buf());
    Ok(f)
}

pub fn write_dict(path: &Path, file: &FoamFile) -> Result<(), FoamDictError> {
    std::fs::write(path, serialize_dict(file)).map_err(|source| FoamDictError::Io {
        path: path.display().to_string(),
        source,
    })
}


#[cfg(test)]
mod json_tests {
    use super::*;

    #[test]
    fn json_form() {
        let v: Vec<FoamValue> = serde_json::from_str(r#"[1.6, "kEpsilon", "uniform 2", "\"gri30.yaml\""]"#).unwrap();
        assert_eq!(v[0], FoamValue::Number(1.6));
        assert_eq!(v[1], FoamValue::token("kEpsilon"));
        assert_eq!(v[2], FoamValue::Seq(vec![FoamValue::token("uniform"), FoamValue::Number(2.0)]));
        assert_eq!(v[3], FoamValue::Str("gri30.yaml".into()));
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"[1.6,"kEpsilon","uniform 2","\"gri30.yaml\""]"#);
    }
}
