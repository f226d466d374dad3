use std::collections::BTreeSet;
use std::path::{Component, Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ToolError;

const MAX_SYMLINK_HOPS: usize = 40;
pub const MIN_OUTPUT_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandboxPolicy {
    pub root: PathBuf,
    #[serde(with = "secs")]
    pub timeout: Duration,
    pub output_cap: usize,
    pub env_allowlist: BTreeSet<String>,
    pub network_allowed: bool,
    /// Directories prepended to `PATH` for shell commands (solver wrappers).
    #[serde(default)]
    pub path_prefix: Vec<PathBuf>,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl SandboxPolicy {
    /// Policy with the default envelope: 120 s timeout, 64 KiB output cap,
    /// a minimal environment and no network.
    pub fn new(root: impl AsRef<Path>) -> Result<Self, ToolError> {
        let root = root.as_ref();
        let canon = root
            .canonicalize()
            .map_err(|e| ToolError::InvalidPolicy(format!("root {}: {e}", root.display())))?;
        if !canon.is_dir() {
            return Err(ToolError::InvalidPolicy(format!("root {} is not a directory", root.display())));
        }
        Ok(Self {
            root: canon,
            timeout: Duration::from_secs(120),
            output_cap: 64 * 1024,
            env_allowlist: ["PATH", "HOME", "LANG", "LC_ALL", "TERM", "USER", "TMPDIR"]
                .into_iter()
                .map(String::from)
                .collect(),
            network_allowed: false,
            path_prefix: Vec::new(),
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_output_cap(mut self, cap: usize) -> Self {
        self.output_cap = cap;
        self
    }

    pub fn allow_env(mut self, name: impl Into<String>) -> Self {
        self.env_allowlist.insert(name.into());
        self
    }

    pub fn with_path_prefix(mut self, dir: impl Into<PathBuf>) -> Self {
        self.path_prefix.push(dir.into());
        self
    }

    pub fn validate(&self) -> Result<(), ToolError> {
        if !self.root.is_absolute() || !self.root.is_dir() {
            return Err(ToolError::InvalidPolicy(format!(
                "root {} must be an existing absolute directory",
                self.root.display()
            )));
        }
        if self.timeout.is_zero() {
            return Err(ToolError::InvalidPolicy("timeout must be positive".into()));
        }
        if self.output_cap < MIN_OUTPUT_CAP {
            return Err(ToolError::InvalidPolicy(format!("output_cap must be at least {MIN_OUTPUT_CAP}")));
        }
        Ok(())
    }

    /// Resolves `path` (relative to the root, or absolute) with symlinks
    /// followed, and denies anything that lands outside the root.
    pub fn resolve(&self, path: impl AsRef<Path>) -> Result<PathBuf, ToolError> {
        resolve_in_root(&self.root, path.as_ref())
    }

    /// Root-relative rendering with `/` separators; the root itself is `.`.
    pub fn relative(&self, abs: &Path) -> String {
        match abs.strip_prefix(&self.root) {
            Ok(rel) if rel.as_os_str().is_empty() => ".".to_string(),
            Ok(rel) => rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/"),
            Err(_) => abs.display().to_string(),
        }
    }
}

pub fn resolve_in_root(root: &Path, path: &Path) -> Result<PathBuf, ToolError> {
    let denied = || ToolError::Denied(path.display().to_string());
    let start = if path.is_absolute() { path.to_path_buf() } else { root.join(path) };
    let mut pending: Vec<std::ffi::OsString> = Vec::new();
    push_components(&mut pending, &start);
    let mut out = PathBuf::from("/");
    let mut hops = 0;
    while let Some(comp) = pending.pop() {
        if comp == ".." {
            out.pop();
            continue;
        }
        if comp == "." || comp.is_empty() {
            continue;
        }
        out.push(&comp);
        let is_link = std::fs::symlink_metadata(&out)
            .map(|m| m.file_type().is_symlink())
            .unwrap_or(false);
        if !is_link {
            continue;
        }
        hops += 1;
        if hops > MAX_SYMLINK_HOPS {
            return Err(denied());
        }
        let target = std::fs::read_link(&out).map_err(|_| denied())?;
        out.pop();
        if target.is_absolute() {
            out = PathBuf::from("/");
        }
        push_components(&mut pending, &target);
    }
    if out.starts_with(root) {
        Ok(out)
    } else {
        Err(denied())
    }
}

/// Pushes the components of `p` so that popping yields them in order.
fn push_components(stack: &mut Vec<std::ffi::OsString>, p: &Path) {
    let comps: Vec<std::ffi::OsString> = p
        .components()
        .filter_map(|c| match c {
            Component::RootDir | Component::Prefix(_) => None,
            Component::CurDir => Some(".".into()),
            Component::ParentDir => Some("..".into()),
            Component::Normal(s) => Some(s.to_os_string()),
        })
        .collect();
    stack.extend(comps.into_iter().rev());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_defaults_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let p = SandboxPolicy::new(dir.path()).unwrap();
        assert_eq!(p.timeout, Duration::from_secs(120));
        assert_eq!(p.output_cap, 65536);
        assert!(!p.network_allowed);
        p.validate().unwrap();
        assert!(p.clone().with_output_cap(100).validate().is_err());
        assert!(p.with_timeout(Duration::ZERO).validate().is_err());
        assert!(SandboxPolicy::new(dir.path().join("absent")).is_err());
    }

    #[test]
    fn resolution_rules() {
        let dir = tempfile::tempdir().unwrap();
        let p = SandboxPolicy::new(dir.path()).unwrap();
        std::fs::create_dir(p.root.join("a")).unwrap();
        assert_eq!(p.resolve("a/../b").unwrap(), p.root.join("b"));
        assert_eq!(p.resolve(".").unwrap(), p.root);
        assert!(matches!(p.resolve("../x"), Err(ToolError::Denied(_))));
        assert!(matches!(p.resolve("/etc/passwd"), Err(ToolError::Denied(_))));
        assert_eq!(p.resolve(p.root.join("a")).unwrap(), p.root.join("a"));

        std::os::unix::fs::symlink("/etc", p.root.join("out")).unwrap();
        assert!(matches!(p.resolve("out/passwd"), Err(ToolError::Denied(_))));
        std::os::unix::fs::symlink("a", p.root.join("in")).unwrap();
        assert_eq!(p.resolve("in/f").unwrap(), p.root.join("a/f"));
        std::os::unix::fs::symlink("loop", p.root.join("loop")).unwrap();
        assert!(matches!(p.resolve("loop"), Err(ToolError::Denied(_))));
    }

    #[test]
    fn relative_rendering() {
        let dir = tempfile::tempdir().unwrap();
        let p = SandboxPolicy::new(dir.path()).unwrap();
        assert_eq!(p.relative(&p.root), ".");
        assert_eq!(p.relative(&p.root.join("a/b")), "a/b");
    }
}
