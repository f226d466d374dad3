mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use common::{set, Workspace};
use flamepilot::foamdict::FoamValue;
use flamepilot::literature::{sheet_to_checklist, validate_sheet, MappingTable, SECTIONS};
use flamepilot::runmgr::{parse_log, run_to_completion, DiagnosticKind, ProgressTracker};
use flamepilot::study::{apply_edit, clone_case, compare_profiles, run_study, ParameterEdit, ProfileSample, StudySpec};
use proptest::prelude::*;
use serde_json::{json, Value};

fn bytes_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    walkdir::WalkDir::new(root)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| (e.path().strip_prefix(root).unwrap().to_path_buf(), std::fs::read(e.path()).unwrap()))
        .collect()
}

#[test]
fn running_a_clone_leaves_the_base_untouched() {
    let ws = Workspace::new();
    let base = ws.case("base", "success");
    let before = bytes_under(&base);
    let derived = ws.root().join("derived");
    clone_case(&base, &derived).unwrap();
    let rec = run_to_completion(&ws.policy, &derived, "stubFoam", "r1", 20, |_| {}).unwrap();
    assert!(rec.is_clean());
    assert_eq!(bytes_under(&base), before);
    assert_ne!(bytes_under(&derived), before);
}

#[test]
fn an_edit_touches_exactly_one_file() {
    let ws = Workspace::new();
    let case = ws.case("c", "success");
    let edits = [
        ("constant/turbulenceProperties", "RAS/kEpsilonCoeffs/C1", FoamValue::Number(1.52)),
        ("system/controlDict", "endTime", FoamValue::Number(0.02)),
        ("constant/combustionProperties", "combustionModel", FoamValue::token("laminar")),
    ];
    for (file, key, value) in edits {
        let before = bytes_under(&case);
        apply_edit(&case, &ParameterEdit::new(file, key.parse().unwrap(), value)).unwrap();
        let after = bytes_under(&case);
        let changed: Vec<&PathBuf> = after.keys().filter(|k| before.get(*k) != after.get(*k)).collect();
        assert_eq!(changed, vec![&PathBuf::from(file)]);
        assert_eq!(before.len(), after.len());
    }
}

#[test]
fn failing_member_does_not_stop_the_study() {
    let ws = Workspace::new();
    ws.case("base", "success");
    let spec = StudySpec {
        base_case: "base".into(),
        dict_file: "system/controlDict".into(),
        key_path: "stubMode".parse().unwrap(),
        values: vec![FoamValue::token("success"), FoamValue::token("fatal-always"), FoamValue::token("success")],
        run_command: "stubFoam".into(),
        label: "modes".into(),
        compare: None,
    };
    let result = run_study(&spec, &ws.policy, Path::new("studies"), 20, |_| {}).unwrap();
    assert_eq!(result.members.len(), 3);
    let kinds: Vec<String> = result.members.iter().map(|m| m.result()).collect();
    assert_eq!(kinds, vec!["clean_exit", "fatal_error", "clean_exit"]);
    assert!(result.members[0].is_clean() && !result.members[1].is_clean() && result.members[2].is_clean());
}

#[test]
fn every_value_gets_a_member_even_when_edits_fail() {
    let ws = Workspace::new();
    let base = ws.case("base", "success");
    set(&base, "system/controlDict", "endTime", FoamValue::Number(0.002));
    let spec = StudySpec {
        base_case: "base".into(),
        dict_file: "system/controlDict".into(),
        key_path: "endTime/deeper".parse().unwrap(),
        values: vec![FoamValue::Number(1.0), FoamValue::Number(2.0)],
        run_command: "stubFoam".into(),
        label: "bad-path".into(),
        compare: None,
    };
    let result = run_study(&spec, &ws.policy, Path::new("studies"), 20, |_| {}).unwrap();
    assert_eq!(result.members.len(), 2);
    assert!(result.members.iter().all(|m| m.run.is_none() && m.error.is_some()));
}

fn profile(max_len: usize) -> impl Strategy<Value = Vec<ProfileSample>> {
    prop::collection::btree_map(-1000i32..1000, -1e3f64..1e3, 1..max_len).prop_map(|m| {
        m.into_iter()
            .map(|(c, value)| ProfileSample { coordinate: c as f64 / 100.0, value })
            .collect()
    })
}

proptest! {
    #[test]
    fn rms_of_a_profile_against_itself_is_zero(x in profile(40)) {
        let r = compare_profiles("T", &x, &x).unwrap();
        prop_assert_eq!(r.rms_error, 0.0);
        prop_assert_eq!(r.n_clipped, 0);
    }

    #[test]
    fn rms_ignores_experimental_order(
        sim in profile(30),
        exp in profile(30),
        seed in any::<u64>(),
    ) {
        let a = compare_profiles("T", &sim, &exp);
        let mut shuffled = exp.clone();
        let mut rng = <rand::rngs::StdRng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(&mut shuffled[..], &mut rng);
        let b = compare_profiles("T", &sim, &shuffled);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert!((a.rms_error - b.rms_error).abs() <= 1e-12 * a.rms_error.max(1.0));
                prop_assert_eq!((a.n_points, a.n_clipped), (b.n_points, b.n_clipped));
                let mse: f64 = a.per_point.iter().map(|(_, s, e)| (s - e).powi(2)).sum::<f64>() / a.n_points as f64;
                prop_assert!((a.rms_error - mse.sqrt()).abs() <= 1e-12 * a.rms_error.max(1.0));
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }
}

fn log_line() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => (0u32..1000).prop_map(|t| format!("Time = {}", t as f64 / 1000.0)),
        3 => (0.0f64..200.0).prop_map(|c| format!("Courant Number mean: 0.1 max: {c}")),
        2 => (0.0f64..2000.0).prop_map(|e| format!("time step continuity errors : sum local = {e}, global = 0")),
        1 => Just("--> FOAM FATAL ERROR:".to_string()),
        1 => Just("#0  Foam::error::printStack(Foam::Ostream&) sigFpe".to_string()),
        1 => Just("trapFpe: Floating point exception trapping - sigFpe : Enabling".to_string()),
        1 => Just("Failed 2 mesh checks.".to_string()),
        4 => "[a-zA-Z =:.]{0,30}",
    ]
}

proptest! {
    #[test]
    fn log_parsing_is_monotone_and_bounded(
        lines in prop::collection::vec(log_line(), 0..120),
        cut in any::<prop::sample::Index>(),
        exit in prop::option::of(0i32..3),
    ) {
        let text = lines.join("\n");
        let full = parse_log(&text, exit);
        prop_assert_eq!(&full, &parse_log(&text, exit));
        let k = if lines.is_empty() { 0 } else { cut.index(lines.len() + 1) };
        let prefix = parse_log(&lines[..k].join("\n"), exit);
        prop_assert!(prefix.0.latest_time <= full.0.latest_time);

        let mut tracker = ProgressTracker::new();
        let mut last = 0.0f64;
        for l in &lines {
            tracker.feed_line(l);
            prop_assert!(tracker.progress().latest_time >= last);
            last = tracker.progress().latest_time;
        }

        let (_, diag) = full;
        prop_assert!(diag.excerpt.lines().count() <= flamepilot::runmgr::DEFAULT_TAIL_LINES);
        let clean = diag.kind == DiagnosticKind::CleanExit;
        prop_assert_eq!(clean, exit == Some(0) && tracker.finding().is_none());
        if !clean {
            prop_assert!(!diag.excerpt.is_empty() || text.is_empty());
        }
    }
}

fn item() -> impl Strategy<Value = Value> {
    (
        prop_oneof![Just("".to_string()), "[a-z]{1,8}( [a-z]{1,8}){0,2}"],
        prop_oneof![
            (-1e6f64..1e6).prop_map(|x| json!(x)),
            "[a-zA-Z]{0,8}".prop_map(|s| json!(s)),
            Just(json!(null)),
            Just(json!(["list"])),
        ],
        prop_oneof![Just("-".to_string()), Just("m/s".to_string()), Just("".to_string())],
        prop_oneof![Just("".to_string()), "[a-z]{2,5}( [a-z]{2,5}){0,40}"],
    )
        .prop_map(|(name, value, units, quote)| json!({"name": name, "value": value, "units": units, "provenance_quote": quote}))
}

fn sheet_doc() -> impl Strategy<Value = Value> {
    (
        prop_oneof![Just(json!("paper")), Just(json!("")), Just(json!(null))],
        prop::collection::vec(prop::option::of(prop::collection::vec(item(), 0..4)), 6),
    )
        .prop_map(|(id, sections)| {
            let mut doc = serde_json::Map::new();
            doc.insert("paper_id".into(), id);
            for (name, items) in SECTIONS.iter().zip(sections) {
                if let Some(items) = items {
                    doc.insert(name.to_string(), Value::Array(items));
                }
            }
            Value::Object(doc)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn accepted_sheets_satisfy_the_schema(doc in sheet_doc()) {
        if let Ok(sheet) = validate_sheet(&doc) {
            prop_assert!(!sheet.paper_id.trim().is_empty());
            for (name, items) in sheet.sections() {
                if ["geometry", "boundary_conditions", "models"].contains(&name) {
                    prop_assert!(!items.is_empty(), "{name} empty");
                }
                for it in items {
                    prop_assert!(!it.name.trim().is_empty());
                    prop_assert!(!it.provenance_quote.trim().is_empty());
                    if let flamepilot::literature::ParamValue::Number(x) = it.value {
                        prop_assert!(x.is_finite());
                    }
                }
            }
            let table = MappingTable::parse("*name* → constant/x:a/b\n[a-m]* → system/y:c\n").unwrap();
            let checklist = sheet_to_checklist(&sheet, &table);
            prop_assert_eq!(checklist.items.len(), sheet.item_count());
            let recognized = sheet
                .sections()
                .iter()
                .flat_map(|(_, items)| items.iter())
                .filter(|i| table.lookup(&i.name).is_some())
                .count();
            prop_assert_eq!(checklist.edits().count(), recognized);
        }
    }
}
