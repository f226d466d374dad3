use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{ErrorKind, SandboxPolicy, ToolError, ToolOutcome};

pub const DEFAULT_READ_LINES: usize = 2000;
const BINARY_SNIFF: usize = 8192;

pub fn is_binary(bytes: &[u8]) -> bool {
    bytes[..bytes.len().min(BINARY_SNIFF)].contains(&0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WriteMode {
    Create,
    Overwrite,
    Append,
}

/// Reads a window of lines. `offset_line` is 1-based; without a window the
/// first 2000 lines are returned and files larger than the output cap are
/// refused as `too_large`.
pub fn read_file(
    policy: &SandboxPolicy,
    path: impl AsRef<Path>,
    offset_line: Option<usize>,
    limit_lines: Option<usize>,
) -> ToolOutcome {
    let started = Instant::now();
    let path = path.as_ref();
    let abs = match policy.resolve(path) {
        Ok(p) => p,
        Err(e) => return ToolOutcome::from(e).with_duration(started),
    };
    if abs.is_dir() {
        return ToolOutcome::failure(ErrorKind::Io, format!("{} is a directory", path.display()));
    }
    let bytes = match std::fs::read(&abs) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return ToolOutcome::from(ToolError::NotFound(path.display().to_string())).with_duration(started)
        }
        Err(e) => return ToolOutcome::from(ToolError::Io(e)).with_duration(started),
    };
    if is_binary(&bytes) {
        return ToolOutcome::failure(ErrorKind::TooLarge, format!("{} is a binary file", path.display()))
            .with_duration(started);
    }
    let windowed = offset_line.is_some() || limit_lines.is_some();
    if !windowed && bytes.len() > policy.output_cap {
        return ToolOutcome::failure(
            ErrorKind::TooLarge,
            format!(
                "{} is {} bytes, above the {} byte cap; read it with offset_line/limit_lines",
                path.display(),
                bytes.len(),
                policy.output_cap
            ),
        )
        .with_duration(started);
    }
    let text = String::from_utf8_lossy(&bytes);
    let skip = offset_line.unwrap_or(1).max(1) - 1;
    let take = limit_lines.unwrap_or(DEFAULT_READ_LINES);
    let content: String = text.split_inclusive('\n').skip(skip).take(take).collect();
    ToolOutcome::success(content)
        .capped(policy.output_cap)
        .with_duration(started)
}

pub fn write_file(policy: &SandboxPolicy, path: impl AsRef<Path>, content: &str, mode: WriteMode) -> ToolOutcome {
    let started = Instant::now();
    let path = path.as_ref();
    let abs = match policy.resolve(path) {
        Ok(p) => p,
        Err(e) => return ToolOutcome::from(e),
    };
    if abs.is_dir() {
        return ToolOutcome::failure(ErrorKind::Io, format!("{} is a directory", path.display()));
    }
    if let Some(parent) = abs.parent() {
        if let Err(e) = std::fs::create_dir_all(parent) {
            return ToolOutcome::from(ToolError::Io(e));
        }
    }
    let mut opts = OpenOptions::new();
    match mode {
        WriteMode::Create => opts.write(true).create_new(true),
        WriteMode::Overwrite => opts.write(true).create(true).truncate(true),
        WriteMode::Append => opts.append(true).create(true),
    };
    let result = opts.open(&abs).and_then(|mut f| f.write_all(content.as_bytes()));
    match result {
        Ok(()) => ToolOutcome::success(format!(
            "wrote {} bytes to {}",
            content.len(),
            policy.relative(&abs)
        ))
        .with_duration(started),
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => ToolOutcome::failure(
            ErrorKind::Conflict,
            format!("{} already exists (mode create)", path.display()),
        ),
        Err(e) => ToolOutcome::from(ToolError::Io(e)),
    }
}

/// Indented tree listing: the directory's own name first, then entries sorted
/// by name, two spaces per nesting level, directories suffixed with `/`.
/// Symlinks are listed but never descended into.
pub fn list_dir(policy: &SandboxPolicy, path: impl AsRef<Path>, depth: usize) -> ToolOutcome {
    let started = Instant::now();
    let path = path.as_ref();
    let abs = match policy.resolve(path) {
        Ok(p) => p,
        Err(e) => return ToolOutcome::from(e),
    };
    if !abs.exists() {
        return ToolOutcome::from(ToolError::NotFound(path.display().to_string()));
    }
    if !abs.is_dir() {
        return ToolOutcome::failure(ErrorKind::Io, format!("{} is not a directory", path.display()));
    }
    let name = if abs == policy.root {
        ".".to_string()
    } else {
        abs.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
    };
    let mut out = format!("{name}/\n");
    if let Err(e) = walk(&abs, 0, depth, &mut out, policy.output_cap) {
        return ToolOutcome::from(ToolError::Io(e));
    }
    ToolOutcome::success(out).capped(policy.output_cap).with_duration(started)
}

fn walk(dir: &Path, level: usize, depth: usize, out: &mut String, cap: usize) -> std::io::Result<()> {
    if level >= depth || out.len() > cap {
        return Ok(());
    }
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let ft = e.file_type()?;
        out.push_str(&"  ".repeat(level));
        out.push_str(&e.file_name().to_string_lossy());
        if ft.is_dir() {
            out.push('/');
        }
        out.push('\n');
        if ft.is_dir() {
            walk(&e.path(), level + 1, depth, out, cap)?;
        }
    }
    Ok(())
}
