//! One function per headline criterion. Each returns a short summary on
//! success and a description of the first violation otherwise, so the same
//! code backs both the focused tests and the `acceptance` report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use flamepilot::bench::{aggregate, compute_nmse, display_ratio, nmse_values, CaseOutcome, DEFAULT_THRESHOLD};
use flamepilot::foamdict::{parse_dict, parse_dict_bytes, parse_field, read_dict, serialize_dict};
use flamepilot::gateway::{SessionStore, StoreError};
use flamepilot::orchestrator::{fold, strip_timestamps, EventKind, EventRecord, SessionState};
use flamepilot::scenario;
use flamepilot::toolkit::{bash_exec, grep_search, list_dir, read_file, write_file, ErrorKind, SandboxPolicy, ToolError, WriteMode};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use super::fixture;
use super::foam_gen;

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(started: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let took = started.elapsed();
    ensure!(took < limit, "{what} took {took:?}, limit {limit:?}");
    Ok(())
}

pub fn bench_scores() -> Check {
    let started = Instant::now();
    let path = fixture("bench/recorded-outcomes.json");
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let recorded: Vec<CaseOutcome> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let outcomes: Vec<CaseOutcome> = recorded
        .iter()
        .map(|o| CaseOutcome::scored(o.id.clone(), o.executable, o.nmse, DEFAULT_THRESHOLD))
        .collect();
    let s = aggregate(&outcomes, DEFAULT_THRESHOLD).map_err(|e| e.to_string())?;
    ensure!(s.n_cases == 16, "expected 16 recorded cases, found {}", s.n_cases);
    ensure!(s.n_exec == 16 && s.m_exec == 1.0, "m_exec {} from {} executable", s.m_exec, s.n_exec);
    ensure!(s.display_exec() == "1.000", "m_exec displayed as {}", s.display_exec());
    ensure!(s.n_success == 7 && s.success_rate == 7.0 / 16.0, "success {} / rate {}", s.n_success, s.success_rate);
    ensure!(s.success_rate == 0.4375, "success rate {} is not 0.4375", s.success_rate);
    ensure!(s.display_success() == "0.438", "success displayed as {}", s.display_success());
    for c in 0..=16usize {
        ensure!(2 * c != 15, "7.5 successes would be representable");
        let shown = display_ratio(c, 16) == "0.438";
        ensure!(shown == (c == 7), "display_ratio({c}, 16) = {}", display_ratio(c, 16));
    }
    within(started, Duration::from_secs(1), "scoring")?;
    Ok(format!("m_exec {} success_rate {} (7/16)", s.display_exec(), s.display_success()))
}

fn mini_mild_once() -> Result<(tempfile::TempDir, Vec<Value>), String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let exe = PathBuf::from(env!("CARGO_BIN_EXE_flamepilot"));
    let s = scenario::run(&scenario::fixtures_dir(), tmp.path(), Some(exe), "mini-mild")?;
    let root = s.workdir().to_path_buf();
    let log: Vec<Value> = s
        .log()
        .iter()
        .map(|r| strip_timestamps(&serde_json::to_value(r).unwrap()))
        .collect();

    ensure!(s.state() == SessionState::AwaitingUser, "session ended in {:?}", s.state());
    ensure!(root.join("papers/jhc-mild.md").is_file(), "converted paper missing");

    let mut names: BTreeMap<String, String> = BTreeMap::new();
    for e in &log {
        for call in e["payload"]["message"]["tool_calls"].as_array().into_iter().flatten() {
            if let (Some(id), Some(name)) = (call["id"].as_str(), call["tool_name"].as_str()) {
                names.insert(id.to_string(), name.to_string());
            }
        }
    }
    let successes = |tool: &str| {
        log.iter()
            .filter(|e| e["kind"] == "tool_result" && e["payload"]["outcome"]["ok"] == true)
            .filter(|e| {
                let id = e["payload"]["message"]["tool_call_id"].as_str().unwrap_or_default();
                names.get(id).map(String::as_str) == Some(tool)
            })
            .count()
    };
    for tool in ["convert_pdf", "validate_sheet", "sheet_to_checklist", "clone_case", "run_study"] {
        ensure!(successes(tool) > 0, "no successful {tool} result");
    }
    let edits = successes("edit_dict");
    ensure!(edits >= 3, "only {edits} successful dictionary edits");

    let finished: Vec<&Value> = log.iter().filter(|e| e["kind"] == "run_finished").collect();
    ensure!(finished.len() == 2, "{} run_finished events", finished.len());
    ensure!(finished[0]["payload"]["run"]["diagnostic"]["kind"] == "fatal_error", "first run was not fatal");
    ensure!(finished[1]["payload"]["run"]["diagnostic"]["kind"] == "clean_exit", "relaunch was not clean");
    let attempt = finished[1]["payload"]["attempt"].as_u64().unwrap_or(0);
    ensure!(attempt == 2 && attempt <= 5, "clean run at attempt {attempt}");

    let turb = std::fs::read_to_string(root.join("cases/jhc/constant/turbulenceProperties")).map_err(|e| e.to_string())?;
    ensure!(turb.contains("kEpsilon;") && turb.contains("1.6;"), "turbulence edits missing");

    let report_path = root.join("studies/k-inlet/report.json");
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&report_path).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let members = report["members"].as_array().cloned().unwrap_or_default();
    ensure!(members.len() == 3, "{} study members", members.len());
    for m in &members {
        ensure!(m["run"]["diagnostic"]["kind"] == "clean_exit", "member {} not clean", m["index"]);
        let rms = m["comparison"]["rms_error"].as_f64().unwrap_or(-1.0);
        ensure!(rms.is_finite() && rms > 0.0, "member {} rms {rms}", m["index"]);
    }
    let view = fold(s.id(), s.log()).map_err(|(_, e)| e.to_string())?;
    ensure!(&view == s.view(), "replayed view differs from the live view");
    ensure!(s.log().iter().any(|e| e.kind == EventKind::StudyProgress), "no study progress events");
    Ok((tmp, log))
}

pub fn mini_mild() -> Check {
    let started = Instant::now();
    let (_a, first) = mini_mild_once()?;
    let (_b, second) = mini_mild_once()?;
    ensure!(first.len() == second.len(), "logs differ in length: {} vs {}", first.len(), second.len());
    if let Some(i) = (0..first.len()).find(|&i| first[i] != second[i]) {
        return Err(format!("logs differ at event {}: {} vs {}", i + 1, first[i], second[i]));
    }
    within(started, Duration::from_secs(60), "two scenario runs")?;
    Ok(format!("{} events, identical across two runs", first.len()))
}

pub fn corpus_files() -> Vec<PathBuf> {
    let root = fixture("");
    let mut out: Vec<_> = walkdir::WalkDir::new(&root)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .filter(|e| {
            let p = e.path().to_string_lossy();
            (p.contains("/system/") || p.contains("/constant/") || p.contains("/0/")) && e.path().extension().is_none()
        })
        .map(|e| e.into_path())
        .collect();
    out.sort();
    out
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

pub fn dict_round_trip() -> Check {
    let started = Instant::now();
    let corpus = corpus_files();
    ensure!(corpus.len() >= 50, "corpus has only {} files", corpus.len());
    for path in &corpus {
        let f = read_dict(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let text = serialize_dict(&f);
        let back = parse_dict(&text).map_err(|e| format!("{}: reparse {e}", path.display()))?;
        ensure!(back == f, "{} changed on round trip", path.display());
    }

    runner(500)
        .run(&foam_gen::file(), |f| {
            let text = serialize_dict(&f);
            let back = parse_dict(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            prop_assert_eq!(back, f);
            Ok(())
        })
        .map_err(|e| format!("generated tree: {e}"))?;

    runner(10_000)
        .run(&prop::collection::vec(any::<u8>(), 0..256), |bytes| {
            let _ = parse_dict_bytes(&bytes);
            Ok(())
        })
        .map_err(|e| format!("random bytes: {e}"))?;

    within(started, Duration::from_secs(30), "round-trip suite")?;
    Ok(format!("{} corpus files, 500 generated trees, 10000 byte strings", corpus.len()))
}

fn naive_nmse(sim: &[f64], reference: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..sim.len() {
        let d = sim[i] - reference[i];
        num += d * d;
        den += reference[i] * reference[i];
    }
    num / den
}

pub fn nmse_oracle() -> Check {
    let mut rng = StdRng::seed_from_u64(0x6e6d7365);
    let mut worst = 0.0f64;
    for pair in 0..1000 {
        let n = rng.random_range(1..=64);
        let scale = 10f64.powi(rng.random_range(-3..4));
        let sim: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
        let mut reference: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
        if reference.iter().all(|r| *r == 0.0) {
            reference[0] = 1.0;
        }
        let got = nmse_values(&sim, &reference).map_err(|e| format!("pair {pair}: {e}"))?;
        let want = naive_nmse(&sim, &reference);
        let rel = (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        ensure!(rel <= 1e-12, "pair {pair} (n={n}): {got} vs oracle {want}");
    }
    let field = |values: &str| {
        parse_field(&format!(
            "dimensions [0 0 0 1 0 0 0];\ninternalField nonuniform List<scalar> 2({values});\nboundaryField {{}}\n"
        ))
        .map_err(|e| e.to_string())
    };
    let hand = compute_nmse(&field("1 2")?, &field("2 2")?).map_err(|e| e.to_string())?;
    ensure!(hand == 0.125, "[1,2] vs [2,2] gave {hand}");
    Ok(format!("1000 pairs, worst relative error {worst:.1e}; hand case 0.125"))
}

/// Everything under `dir` except `skip`, keyed by relative path: file bytes,
/// link targets and directory markers.
fn snapshot(dir: &Path, skip: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let walk = walkdir::WalkDir::new(dir).follow_links(false).into_iter();
    for entry in walk.filter_entry(|e| e.path() != skip).filter_map(Result::ok) {
        let rel = entry.path().strip_prefix(dir).unwrap().to_path_buf();
        let ft = entry.file_type();
        let content = if ft.is_symlink() {
            let mut v = b"link:".to_vec();
            v.extend(std::fs::read_link(entry.path()).unwrap().to_string_lossy().as_bytes());
            v
        } else if ft.is_dir() {
            b"dir".to_vec()
        } else {
            std::fs::read(entry.path()).unwrap()
        };
        out.insert(rel, content);
    }
    out
}

/// Exactly 100 paths that must all resolve outside `root`.
fn adversarial_paths(tmp: &Path) -> Vec<String> {
    let t = tmp.display().to_string();
    let mut paths: Vec<String> = vec![
        "secret_link".into(),
        "loop".into(),
        "loop/x".into(),
        "/etc/passwd".into(),
        "/".into(),
        format!("{t}/root2/x"),
        "../root2".into(),
        t.clone(),
        "sub/../../root2/x".into(),
        "sub/link_up/secret.txt".into(),
    ];
    let to_tmp = [
        "..", "./..", "sub/../..", "sub/./../..", "sub//..//..", "a/../..", "a/up", "./a/up", "sub/../a/up", "a/up/root/..",
    ];
    let to_outside_tail = ["/outside/secret.txt", "/outside/nested/deep.txt", "/outside/new.txt", "/root2/x", "/outside"];
    let to_outside = [
        "escape".to_string(),
        "escape_abs".to_string(),
        "chain1".to_string(),
        "./escape".to_string(),
        "sub/../escape".to_string(),
        format!("{t}/outside"),
        "a/up/outside".to_string(),
        "../outside".to_string(),
        "../root/../outside".to_string(),
        "../root2/../outside".to_string(),
    ];
    let outside_tail = ["/secret.txt", "/nested/deep.txt", "/new.txt", "", "/nested"];
    for base in to_tmp {
        for tail in to_outside_tail {
            paths.push(format!("{base}{tail}"));
        }
    }
    for base in &to_outside {
        for tail in outside_tail {
            paths.push(format!("{base}{tail}"));
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    paths.retain(|p| seen.insert(p.clone()));
    paths.truncate(100);
    paths
}

fn build_escape_fixture(tmp: &Path) -> PathBuf {
    use std::os::unix::fs::symlink;
    let root = tmp.join("root");
    let outside = tmp.join("outside");
    std::fs::create_dir_all(root.join("sub")).unwrap();
    std::fs::create_dir_all(root.join("a")).unwrap();
    std::fs::create_dir_all(outside.join("nested")).unwrap();
    std::fs::create_dir_all(tmp.join("root2")).unwrap();
    std::fs::write(outside.join("secret.txt"), "top secret needle\n").unwrap();
    std::fs::write(outside.join("nested/deep.txt"), "deep needle\n").unwrap();
    std::fs::write(tmp.join("root2/x"), "sibling needle\n").unwrap();
    std::fs::write(root.join("sub/inner.txt"), "inside needle\n").unwrap();
    symlink("../outside", root.join("escape")).unwrap();
    symlink(&outside, root.join("escape_abs")).unwrap();
    symlink("chain2", root.join("chain1")).unwrap();
    symlink("../outside", root.join("chain2")).unwrap();
    symlink("../outside/secret.txt", root.join("secret_link")).unwrap();
    symlink("loop", root.join("loop")).unwrap();
    symlink("../..", root.join("a/up")).unwrap();
    symlink("../../outside", root.join("sub/link_up")).unwrap();
    root
}

fn expect_denied(what: &str, path: &str, outcome: &flamepilot::toolkit::ToolOutcome) -> Result<(), String> {
    ensure!(
        !outcome.ok && outcome.error_kind == ErrorKind::Denied,
        "{what} '{path}' was not denied: {:?} {}",
        outcome.error_kind,
        outcome.content
    );
    Ok(())
}

fn naive_grep(root: &Path, needle: &str) -> Vec<(String, usize, String)> {
    fn walk(dir: &Path, root: &Path, needle: &str, out: &mut Vec<(String, usize, String)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let entry = entry.unwrap();
            let ft = std::fs::symlink_metadata(entry.path()).unwrap().file_type();
            if ft.is_dir() {
                walk(&entry.path(), root, needle, out);
            } else if ft.is_file() {
                let bytes = std::fs::read(entry.path()).unwrap();
                if bytes.contains(&0) {
                    continue;
                }
                let rel: Vec<String> = entry
                    .path()
                    .strip_prefix(root)
                    .unwrap()
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned())
                    .collect();
                let rel = rel.join("/");
                let text = String::from_utf8_lossy(&bytes).into_owned();
                let mut pieces: Vec<&str> = text.split('\n').collect();
                if text.ends_with('\n') {
                    pieces.pop();
                }
                for (i, line) in pieces.into_iter().enumerate() {
                    if line.contains(needle) {
                        out.push((rel.clone(), i + 1, line.to_string()));
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, needle, &mut out);
    out.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
    out
}

fn random_tree(rng: &mut StdRng, root: &Path) -> usize {
    const ALPHABET: &[&str] = &["a", "b", "c", " ", "ab", "é", "x", "\t", "ca"];
    let mut dirs = vec![root.to_path_buf()];
    for _ in 0..rng.random_range(0..5) {
        let parent = dirs[rng.random_range(0..dirs.len())].clone();
        let d = parent.join(format!("d{}", rng.random_range(0..100)));
        std::fs::create_dir_all(&d).unwrap();
        dirs.push(d);
    }
    let n_files = rng.random_range(1..12);
    for i in 0..n_files {
        let dir = &dirs[rng.random_range(0..dirs.len())];
        let mut content = Vec::new();
        for _ in 0..rng.random_range(0..15) {
            for _ in 0..rng.random_range(0..12) {
                content.extend_from_slice(ALPHABET[rng.random_range(0..ALPHABET.len())].as_bytes());
            }
            content.push(b'\n');
        }
        if rng.random_bool(0.3) {
            content.extend_from_slice(b"tail without newline ab");
        }
        if rng.random_bool(0.1) {
            content.insert(rng.random_range(0..=content.len()), 0);
        }
        std::fs::write(dir.join(format!("f{i}.txt")), content).unwrap();
    }
    if rng.random_bool(0.3) {
        std::os::unix::fs::symlink("f0.txt", root.join("alias.txt")).unwrap();
    }
    n_files
}

pub fn sandbox_confinement() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = build_escape_fixture(tmp.path());
    let policy = SandboxPolicy::new(&root).map_err(|e| e.to_string())?;
    let before = snapshot(tmp.path(), &root);
    let paths = adversarial_paths(tmp.path());
    ensure!(paths.len() == 100, "built {} adversarial paths", paths.len());
    for p in &paths {
        ensure!(matches!(policy.resolve(p), Err(ToolError::Denied(_))), "resolve '{p}' was not denied");
        expect_denied("read", p, &read_file(&policy, p, None, None))?;
        expect_denied("write", p, &write_file(&policy, p, "pwned\n", WriteMode::Overwrite))?;
        expect_denied("create", p, &write_file(&policy, p, "pwned\n", WriteMode::Create))?;
        expect_denied("append", p, &write_file(&policy, p, "pwned\n", WriteMode::Append))?;
        expect_denied("list", p, &list_dir(&policy, p, 2))?;
        expect_denied("bash cwd", p, &bash_exec("echo pwned > pwned.txt", p, &policy))?;
        ensure!(
            matches!(grep_search(&policy, "needle", p, true, 1000), Err(ToolError::Denied(_))),
            "grep under '{p}' was not denied"
        );
    }
    let after = snapshot(tmp.path(), &root);
    ensure!(before == after, "filesystem outside the root changed");

    let inside = grep_search(&policy, "needle", ".", true, 1000).map_err(|e| e.to_string())?;
    ensure!(
        inside.len() == 1 && inside[0].path == "sub/inner.txt",
        "grep from the root followed a link out: {inside:?}"
    );

    let mut rng = StdRng::seed_from_u64(0x67726570);
    let mut total_hits = 0;
    for t in 0..50 {
        let tree = tempfile::tempdir().map_err(|e| e.to_string())?;
        random_tree(&mut rng, tree.path());
        let policy = SandboxPolicy::new(tree.path()).map_err(|e| e.to_string())?;
        let needle: String = (0..rng.random_range(1..3)).map(|_| ['a', 'b', 'c', 'é'][rng.random_range(0..4)]).collect();
        let got: Vec<(String, usize, String)> = grep_search(&policy, &needle, ".", true, usize::MAX)
            .map_err(|e| format!("tree {t}: {e}"))?
            .into_iter()
            .map(|h| (h.path, h.line_number, h.line_text))
            .collect();
        let want = naive_grep(tree.path(), &needle);
        ensure!(got == want, "tree {t} needle {needle:?}: {} hits vs oracle {}", got.len(), want.len());
        total_hits += want.len();
    }
    Ok(format!("100 paths denied by every tool, outside unchanged, 50 grep trees ({total_hits} hits) match"))
}

pub fn durability() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path().join("sessions");
    let store = SessionStore::open(&dir).map_err(|e| e.to_string())?;
    store.create_session("long").map_err(|e| e.to_string())?;
    for seq in 1..=200u64 {
        let rec = EventRecord {
            seq,
            timestamp: seq,
            kind: EventKind::TaskChanged,
            payload: json!({"task": {"id": seq, "title": format!("task {seq}"), "status": "pending", "depends_on": []}}),
        };
        store.append_event("long", &rec).map_err(|e| e.to_string())?;
    }
    let path = store.log_path("long").map_err(|e| e.to_string())?;
    let full = std::fs::read(&path).map_err(|e| e.to_string())?;
    let boundaries: Vec<usize> = std::iter::once(0)
        .chain(full.iter().enumerate().filter(|(_, b)| **b == b'\n').map(|(i, _)| i + 1))
        .collect();
    ensure!(boundaries.len() == 201, "{} append boundaries", boundaries.len());
    let reference = store.replay("long").map_err(|e| e.to_string())?;
    for (n, &cut) in boundaries.iter().enumerate() {
        std::fs::write(&path, &full[..cut]).map_err(|e| e.to_string())?;
        let fresh = SessionStore::open(&dir).map_err(|e| e.to_string())?;
        let r = fresh.replay("long").map_err(|e| format!("cut after {n} events: {e}"))?;
        ensure!(r.records[..] == reference.records[..n], "cut after {n}: replayed a different prefix");
        ensure!(r.view.last_seq == n as u64 && r.view.tasks.len() == n, "cut after {n}: view disagrees");
        if n < 200 {
            let mid = cut + (boundaries[n + 1] - cut) / 2;
            std::fs::write(&path, &full[..mid]).map_err(|e| e.to_string())?;
            match fresh.replay("long") {
                Err(StoreError::CorruptLog { seq, partial, .. }) => {
                    ensure!(seq == n as u64 + 1, "torn record reported at seq {seq}");
                    ensure!(partial.records[..] == reference.records[..n], "torn tail: wrong prefix");
                }
                other => return Err(format!("torn write at byte {mid} not flagged: {other:?}")),
            }
        }
    }
    std::fs::write(&path, &full).map_err(|e| e.to_string())?;
    Ok("201 clean cuts replay their prefix, 200 torn tails flagged".into())
}
