//! The atomic tools inside a scratch sandbox, plus an escape attempt.

use flamepilot::toolkit::{bash_exec, format_hits, grep_search, list_dir, read_file, write_file, SandboxPolicy, WriteMode};

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let policy = SandboxPolicy::new(tmp.path()).unwrap();

    let w = write_file(&policy, "notes/plan.txt", "mesh first\nthen run\nthen compare\n", WriteMode::Create);
    println!("write: {}", w.content);
    println!("read:\n{}", read_file(&policy, "notes/plan.txt", Some(2), Some(1)).content);
    println!("list:\n{}", list_dir(&policy, ".", 2).content);

    let hits = grep_search(&policy, "then", ".", true, 10).unwrap();
    print!("grep:\n{}", format_hits(&hits));

    let out = bash_exec("wc -l notes/plan.txt", ".", &policy);
    println!("bash (exit {:?}): {}", out.exit_code, out.content.trim());

    let escape = read_file(&policy, "../../etc/passwd", None, None);
    println!("escape: ok={} kind={:?}", escape.ok, escape.error_kind);
}
