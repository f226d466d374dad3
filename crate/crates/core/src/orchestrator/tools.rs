//! Tool catalogue exposed to the model and dispatch of the stateless tools.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{json, Value};

use crate::foamdict::{FoamValue, KeyPath};
use crate::literature::{convert_pdf, sheet_to_checklist, validate_sheet, MappingTable};
use crate::retrieval::find_cases;
use crate::skills::{load_skill, SkillRegistry};
use crate::study::{apply_edit, clone_case, run_study, ParameterEdit, StudyEvent, StudyResult, StudySpec};
use crate::toolkit::{
    atomic_tool_specs, bash_exec, format_hits, grep_search, list_dir, read_file, write_file, Danger, ErrorKind,
    ParamType, SandboxPolicy, ToolOutcome, ToolSpec, WriteMode, DEFAULT_MAX_HITS,
};

/// Prefix marking a path under the tutorials root rather than the workdir.
pub const TUTORIAL_PREFIX: &str = "tutorials:";
pub const STUDIES_DIR: &str = "studies";
pub const REPORT_FILE: &str = "report.json";

/// Everything the stateless tools need besides their arguments.
#[derive(Debug, Clone)]
pub struct ToolContext {
    pub policy: SandboxPolicy,
    pub skills: Arc<SkillRegistry>,
    pub tutorials_root: Option<PathBuf>,
    /// Converter template with `{input}` / `{output}` placeholders.
    pub converter: Option<String>,
    pub mapping_table: Option<PathBuf>,
    pub tail_lines: usize,
}

impl ToolContext {
    pub fn new(policy: SandboxPolicy) -> Self {
        Self {
            policy,
            skills: Arc::new(SkillRegistry::default()),
            tutorials_root: None,
            converter: None,
            mapping_table: None,
            tail_lines: crate::runmgr::DEFAULT_TAIL_LINES,
        }
    }
}

pub fn agent_tool_specs() -> Vec<ToolSpec> {
    use ParamType::*;
    let mut specs = atomic_tool_specs();
    specs.extend([
        ToolSpec::new("find_cases", "Rank tutorial cases by how many of the literal patterns occur in their files. Results name cases as 'tutorials:<path>'.", Danger::Safe)
            .param("patterns", StringList, true, "Literal strings such as solver names, model keywords, boundary types")
            .param("max_results", Integer, false, "Maximum cases to return (default 5)"),
        ToolSpec::new("load_skill", "Load the full instructions and resource list of an installed skill.", Danger::Safe)
            .param("name", String, true, "Skill name from the skills index"),
        ToolSpec::new("task_create", "Add a task to the plan.", Danger::Safe)
            .param("title", String, true, "Short task title")
            .param("depends_on", Any, false, "Ids of tasks that must complete first"),
        ToolSpec::new("task_update", "Move a task: pending -> in_progress -> completed|failed, failed -> pending.", Danger::Safe)
            .param("id", Integer, true, "Task id")
            .param("status", String, true, "pending | in_progress | completed | failed"),
        ToolSpec::new("task_list", "Show the plan with task status.", Danger::Safe),
        ToolSpec::new("validate_sheet", "Validate a parameter-sheet JSON file against the sheet schema.", Danger::Safe)
            .param("path", String, true, "Sheet file relative to the workdir"),
        ToolSpec::new("sheet_to_checklist", "Map a validated parameter sheet to dictionary edits and open requirements.", Danger::Safe)
            .param("sheet", String, true, "Sheet file relative to the workdir")
            .param("mapping", String, false, "Mapping table relative to the workdir (default: the configured table)"),
        ToolSpec::new("convert_pdf", "Convert a paper to markdown with the configured converter; writes <input>.md beside it.", Danger::Destructive)
            .param("input", String, true, "Paper file relative to the workdir"),
        ToolSpec::new("clone_case", "Copy the 0/, constant/ and system/ directories of a case into a new directory.", Danger::Destructive)
            .param("base", String, true, "Source case (workdir path or 'tutorials:<path>')")
            .param("dest", String, true, "New case directory relative to the workdir"),
        ToolSpec::new("edit_dict", "Set one entry of a case dictionary, addressed by a '/'-separated key path.", Danger::Destructive)
            .param("case", String, true, "Case directory relative to the workdir")
            .param("dict_file", String, true, "Dictionary file inside the case, e.g. constant/turbulenceProperties")
            .param("key_path", String, true, "Entry path, e.g. RAS/kEpsilonCoeffs/C1")
            .param("value", Any, true, "New value: a number or dictionary text such as 'kEpsilon' or 'uniform 0.5'"),
        ToolSpec::new("run_case", "Run a solver command in a case and classify its log. Failed runs are corrected and relaunched.", Danger::Destructive)
            .param("case", String, true, "Case directory relative to the workdir")
            .param("command", String, true, "Solver command, e.g. simpleFoam"),
        ToolSpec::new("run_study", "Sweep one dictionary value over cloned cases, run each, and compare against experimental data.", Danger::Destructive)
            .param("spec", Object, true, "{base_case, dict_file, key_path, values, run_command, label, compare?: {field, time, experimental}}"),
    ]);
    specs
}

pub fn danger_of(name: &str) -> Option<Danger> {
    agent_tool_specs().into_iter().find(|s| s.name == name).map(|s| s.danger)
}

pub(crate) fn invalid(msg: impl std::fmt::Display) -> ToolOutcome {
    ToolOutcome::failure(ErrorKind::Io, format!("invalid arguments: {msg}"))
}

pub(crate) fn arg_str<'a>(args: &'a Value, key: &str) -> Result<&'a str, ToolOutcome> {
    args.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| invalid(format!("'{key}' must be a string")))
}

fn arg_opt_str<'a>(args: &'a Value, key: &str) -> Option<&'a str> {
    args.get(key).and_then(Value::as_str)
}

pub(crate) fn arg_u64(args: &Value, key: &str) -> Result<Option<u64>, ToolOutcome> {
    match args.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_u64()
            .or_else(|| v.as_str().and_then(|s| s.parse().ok()))
            .map(Some)
            .ok_or_else(|| invalid(format!("'{key}' must be a non-negative integer"))),
    }
}

fn arg_bool(args: &Value, key: &str, default: bool) -> bool {
    args.get(key).and_then(Value::as_bool).unwrap_or(default)
}

fn arg_strings(args: &Value, key: &str) -> Result<Vec<String>, ToolOutcome> {
    match args.get(key) {
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| v.as_str().map(String::from).ok_or_else(|| invalid(format!("'{key}' must hold strings"))))
            .collect(),
        Some(Value::String(s)) => Ok(vec![s.clone()]),
        _ => Err(invalid(format!("'{key}' must be a list of strings"))),
    }
}

/// Resolves a base-case argument, which may point into the tutorials tree.
fn resolve_source(ctx: &ToolContext, p: &str) -> Result<PathBuf, ToolOutcome> {
    match p.strip_prefix(TUTORIAL_PREFIX) {
        Some(rel) => {
            let root = ctx
                .tutorials_root
                .as_ref()
                .ok_or_else(|| ToolOutcome::failure(ErrorKind::NotFound, "no tutorials root configured"))?;
            Ok(crate::toolkit::resolve_in_root(root, Path::new(rel))?)
        }
        None => Ok(ctx.policy.resolve(p)?),
    }
}

fn guarded<T>(r: Result<T, ToolOutcome>) -> Result<T, ToolOutcome> {
    r
}

/// Runs one of the stateless tools. Task and run tools are handled by the
/// session; asking for them here is an error.
pub fn dispatch_tool(ctx: &ToolContext, name: &str, args: &Value, on_study: &mut dyn FnMut(StudyEvent)) -> ToolOutcome {
    let cap = ctx.policy.output_cap;
    let out = match name {
        "read_file" => guarded((|| {
            let path = arg_str(args, "path")?;
            let offset = arg_u64(args, "offset_line")?.map(|v| v as usize);
            let limit = arg_u64(args, "limit_lines")?.map(|v| v as usize);
            Ok(read_file(&ctx.policy, path, offset, limit))
        })()),
        "write_file" => guarded((|| {
            let path = arg_str(args, "path")?;
            let content = arg_str(args, "content")?;
            let mode = match arg_opt_str(args, "mode").unwrap_or("overwrite") {
                "create" => WriteMode::Create,
                "overwrite" => WriteMode::Overwrite,
                "append" => WriteMode::Append,
                other => return Err(invalid(format!("unknown mode '{other}'"))),
            };
            Ok(write_file(&ctx.policy, path, content, mode))
        })()),
        "list_dir" => guarded((|| {
            let path = arg_opt_str(args, "path").unwrap_or(".");
            let depth = arg_u64(args, "depth")?.unwrap_or(2) as usize;
            Ok(list_dir(&ctx.policy, path, depth))
        })()),
        "grep_search" => guarded((|| {
            let pattern = arg_str(args, "pattern")?;
            let path = arg_opt_str(args, "path").unwrap_or(".");
            let max = arg_u64(args, "max_hits")?.map_or(DEFAULT_MAX_HITS, |v| v as usize);
            let hits = grep_search(&ctx.policy, pattern, path, arg_bool(args, "literal", true), max)?;
            Ok(ToolOutcome::success(if hits.is_empty() { "(no matches)".to_string() } else { format_hits(&hits) }))
        })()),
        "bash_exec" => guarded((|| {
            let command = arg_str(args, "command")?;
            let cwd = arg_opt_str(args, "cwd").unwrap_or(".");
            Ok(bash_exec(command, cwd, &ctx.policy))
        })()),
        "find_cases" => guarded((|| {
            let root = ctx
                .tutorials_root
                .as_ref()
                .ok_or_else(|| ToolOutcome::failure(ErrorKind::NotFound, "no tutorials root configured"))?;
            let patterns = arg_strings(args, "patterns")?;
            let max = arg_u64(args, "max_results")?.unwrap_or(5) as usize;
            let found = find_cases(root, &patterns, max).map_err(|e| ToolOutcome::failure(ErrorKind::NotFound, e.to_string()))?;
            if found.is_empty() {
                return Ok(ToolOutcome::success("(no case matched any pattern)"));
            }
            let lines: Vec<String> = found
                .iter()
                .map(|m| {
                    let matched: Vec<String> = m.matched.iter().map(|(p, n)| format!("{p}({n})")).collect();
                    format!(
                        "{TUTORIAL_PREFIX}{} score={} solver={} matched: {}",
                        m.case_root,
                        m.score,
                        m.solver_hint.as_deref().unwrap_or("-"),
                        matched.join(", ")
                    )
                })
                .collect();
            Ok(ToolOutcome::success(lines.join("\n")))
        })()),
        "load_skill" => guarded((|| {
            let name = arg_str(args, "name")?;
            load_skill(&ctx.skills, name)
                .map(ToolOutcome::success)
                .map_err(|e| ToolOutcome::failure(ErrorKind::NotFound, e.to_string()))
        })()),
        "validate_sheet" => guarded((|| {
            let path = ctx.policy.resolve(arg_str(args, "path")?)?;
            let text = std::fs::read_to_string(&path).map_err(|e| ToolOutcome::failure(ErrorKind::NotFound, e.to_string()))?;
            let doc: Value = serde_json::from_str(&text).map_err(|e| ToolOutcome::failure(ErrorKind::Io, format!("not JSON: {e}")))?;
            match validate_sheet(&doc) {
                Ok(sheet) => {
                    let counts: Vec<String> = sheet
                        .sections()
                        .iter()
                        .filter(|(_, items)| !items.is_empty())
                        .map(|(s, items)| format!("{s} {}", items.len()))
                        .collect();
                    Ok(ToolOutcome::success(format!(
                        "valid parameter sheet: {} items ({})",
                        sheet.item_count(),
                        counts.join(", ")
                    )))
                }
                Err(v) => Ok(ToolOutcome::failure(
                    ErrorKind::Conflict,
                    format!(
                        "sheet has {} schema violation(s):\n{}",
                        v.0.len(),
                        v.0.iter().map(|x| format!("  {}: {}", x.path, x.reason)).collect::<Vec<_>>().join("\n")
                    ),
                )),
            }
        })()),
        "sheet_to_checklist" => guarded((|| {
            let path = ctx.policy.resolve(arg_str(args, "sheet")?)?;
            let text = std::fs::read_to_string(&path).map_err(|e| ToolOutcome::failure(ErrorKind::NotFound, e.to_string()))?;
            let doc: Value = serde_json::from_str(&text).map_err(|e| ToolOutcome::failure(ErrorKind::Io, format!("not JSON: {e}")))?;
            let sheet = validate_sheet(&doc).map_err(|v| ToolOutcome::failure(ErrorKind::Conflict, v.to_string()))?;
            let table_path = match arg_opt_str(args, "mapping") {
                Some(p) => ctx.policy.resolve(p)?,
                None => ctx
                    .mapping_table
                    .clone()
                    .ok_or_else(|| ToolOutcome::failure(ErrorKind::NotFound, "no mapping table configured"))?,
            };
            let table = MappingTable::load(&table_path).map_err(|e| ToolOutcome::failure(ErrorKind::Io, e.to_string()))?;
            Ok(ToolOutcome::success(sheet_to_checklist(&sheet, &table).render()))
        })()),
        "convert_pdf" => guarded((|| {
            let input = arg_str(args, "input")?;
            match convert_pdf(&ctx.policy, input, ctx.converter.as_deref()) {
                Ok(c) => Ok(ToolOutcome::success(format!(
                    "wrote {} ({} characters)\n\n{}",
                    c.output,
                    c.markdown.chars().count(),
                    c.markdown
                ))),
                Err(e) => Ok(ToolOutcome::failure(ErrorKind::Io, e.to_string())),
            }
        })()),
        "clone_case" => guarded((|| {
            let base = resolve_source(ctx, arg_str(args, "base")?)?;
            let dest_arg = arg_str(args, "dest")?;
            let dest = ctx.policy.resolve(dest_arg)?;
            clone_case(&base, &dest)
                .map(|d| ToolOutcome::success(format!("cloned {} -> {}", arg_str(args, "base").unwrap_or_default(), ctx.policy.relative(&d))))
                .map_err(|e| ToolOutcome::failure(ErrorKind::Conflict, e.to_string()))
        })()),
        "edit_dict" => guarded((|| {
            let case = ctx.policy.resolve(arg_str(args, "case")?)?;
            let dict_file = arg_str(args, "dict_file")?;
            let key_path: KeyPath = arg_str(args, "key_path")?.parse().map_err(invalid)?;
            let raw = args.get("value").ok_or_else(|| invalid("'value' is required"))?;
            let value: FoamValue = serde_json::from_value(raw.clone()).map_err(invalid)?;
            let edit = ParameterEdit::new(dict_file, key_path.clone(), value);
            let written = apply_edit(&case, &edit).map_err(|e| ToolOutcome::failure(ErrorKind::Io, e.to_string()))?;
            let shown = crate::study::coerce_value(dict_file, &key_path, edit.value.clone());
            Ok(ToolOutcome::success(format!(
                "{}: {} = {}",
                ctx.policy.relative(&written),
                key_path,
                shown.render_inline()
            )))
        })()),
        "run_study" => guarded((|| {
            let spec: StudySpec = serde_json::from_value(args.get("spec").cloned().unwrap_or(Value::Null)).map_err(invalid)?;
            let (result, report) = run_study_with_report(ctx, &spec, on_study).map_err(|e| ToolOutcome::failure(ErrorKind::Io, e))?;
            Ok(ToolOutcome::success(format!("{}report: {report}", result.render_table())))
        })()),
        other => Err(ToolOutcome::failure(ErrorKind::NotFound, format!("unknown tool '{other}'"))),
    };
    match out {
        Ok(o) | Err(o) => o.capped(cap),
    }
}

pub fn report_path(label: &str) -> PathBuf {
    Path::new(STUDIES_DIR).join(label).join(REPORT_FILE)
}

/// Runs the sweep under `studies/` and stores the result document beside the
/// member cases. Returns the result and the report's root-relative path.
pub fn run_study_with_report(
    ctx: &ToolContext,
    spec: &StudySpec,
    on_study: &mut dyn FnMut(StudyEvent),
) -> Result<(StudyResult, String), String> {
    let result = run_study(spec, &ctx.policy, Path::new(STUDIES_DIR), ctx.tail_lines, on_study).map_err(|e| e.to_string())?;
    let report = report_path(&spec.label);
    let text = serde_json::to_string_pretty(&result).map_err(|e| e.to_string())?;
    std::fs::write(ctx.policy.root.join(&report), text).map_err(|e| e.to_string())?;
    Ok((result, report.display().to_string()))
}

/// Compact, duration-free summary stored in events.
pub fn outcome_summary(o: &ToolOutcome) -> Value {
    json!({"ok": o.ok, "error_kind": o.error_kind, "truncated": o.truncated, "exit_code": o.exit_code})
}

/// Text the model sees for an outcome.
pub fn outcome_text(o: &ToolOutcome) -> String {
    if o.ok {
        o.content.clone()
    } else {
        let kind = serde_json::to_value(o.error_kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        match o.exit_code {
            Some(code) => format!("error ({kind}, exit {code}): {}", o.content),
            None => format!("error ({kind}): {}", o.content),
        }
    }
}
