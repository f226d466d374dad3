//! Paper-to-markdown conversion, parameter-sheet validation and the mapping
//! from sheet items to case edits.

mod convert;
mod mapping;
mod sheet;

pub use convert::{convert_pdf, Conversion};
pub use mapping::{glob_match, sheet_to_checklist, CaseChecklist, ChecklistItem, MappingError, MappingRule, MappingTable};
pub use sheet::{validate_sheet, ParamItem, ParamValue, ParameterSheet, SchemaViolations, Violation, SECTIONS};

#[derive(Debug, thiserror::Error)]
pub enum LiteratureError {
    #[error("converter missing: {0}")]
    ConverterMissing(String),
    #[error("converter failed (exit {exit_code:?}): {stderr}")]
    ConverterFailed { exit_code: Option<i32>, stderr: String },
    #[error(transparent)]
    Schema(#[from] SchemaViolations),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Sandbox(#[from] crate::toolkit::ToolError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
