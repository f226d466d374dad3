use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use super::{ErrorKind, SandboxPolicy, ToolError, ToolOutcome};

/// Starts `sh -c command` in `cwd` with the policy's environment allowlist,
/// in its own process group so timeouts can kill the whole tree. Both output
/// streams go to `output`.
pub fn spawn_confined(policy: &SandboxPolicy, cwd: &Path, command: &str, output: Stdio) -> std::io::Result<Child> {
    let mut cmd = Command::new("sh");
    cmd.arg("-c")
        .arg(format!("exec 2>&1\n{command}"))
        .current_dir(cwd)
        .env_clear()
        .stdin(Stdio::null())
        .stdout(output)
        .process_group(0);
    for name in &policy.env_allowlist {
        if let Some(v) = std::env::var_os(name) {
            cmd.env(name, v);
        }
    }
    if !policy.path_prefix.is_empty() {
        let mut dirs = policy.path_prefix.clone();
        if policy.env_allowlist.contains("PATH") {
            if let Some(p) = std::env::var_os("PATH") {
                dirs.extend(std::env::split_paths(&p));
            }
        }
        if let Ok(joined) = std::env::join_paths(dirs) {
            cmd.env("PATH", joined);
        }
    }
    cmd.spawn()
}

pub fn terminate_group(child: &mut Child) {
    let pid = child.id() as libc::pid_t;
    // SAFETY: signalling a process group we created; failure is harmless.
    unsafe {
        libc::kill(-pid, libc::SIGKILL);
    }
    let _ = child.kill();
    let _ = child.wait();
}

/// Runs a shell command and captures its combined output up to the cap.
pub fn bash_exec(command: &str, cwd: impl AsRef<Path>, policy: &SandboxPolicy) -> ToolOutcome {
    let started = Instant::now();
    let cwd = match policy.resolve(cwd.as_ref()) {
        Ok(p) => p,
        Err(e) => return ToolOutcome::from(e),
    };
    if !cwd.is_dir() {
        return ToolOutcome::from(ToolError::NotFound(policy.relative(&cwd)));
    }
    let mut child = match spawn_confined(policy, &cwd, command, Stdio::piped()) {
        Ok(c) => c,
        Err(e) => return ToolOutcome::from(ToolError::Io(e)),
    };
    let mut stdout = child.stdout.take().expect("piped stdout");
    let cap = policy.output_cap;
    let reader = std::thread::spawn(move || {
        let mut kept = Vec::new();
        let mut overflow = false;
        let mut buf = [0u8; 8192];
        loop {
            match stdout.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = cap.saturating_sub(kept.len());
                    if n > room {
                        overflow = true;
                    }
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        (kept, overflow)
    });

    let deadline = started + policy.timeout;
    let status = loop {
        match child.try_wait() {
            Ok(Some(s)) => break Some(s),
            Ok(None) if Instant::now() >= deadline => {
                terminate_group(&mut child);
                break None;
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(5)),
            Err(e) => return ToolOutcome::from(ToolError::Io(e)),
        }
    };
    if status.is_some() {
        // Background children that keep the pipe open would block the reader.
        unsafe {
            libc::kill(-(child.id() as libc::pid_t), libc::SIGKILL);
        }
    }
    let (bytes, overflow) = reader.join().unwrap_or_default();
    let mut content = String::from_utf8_lossy(&bytes).into_owned();
    let truncated = super::truncate_utf8(&mut content, cap) || overflow;
    let mut out = match status {
        Some(s) => {
            let code = s.code().unwrap_or(-1);
            ToolOutcome {
                ok: code == 0,
                content,
                truncated,
                exit_code: Some(code),
                duration_ms: 0,
                error_kind: ErrorKind::None,
            }
        }
        None => ToolOutcome {
            ok: false,
            content,
            truncated,
            exit_code: None,
            duration_ms: 0,
            error_kind: ErrorKind::Timeout,
        },
    };
    out.duration_ms = started.elapsed().as_millis() as u64;
    out
}
