mod common;

use flamepilot::toolkit::{
    atomic_tool_specs, bash_exec, grep_search, list_dir, read_file, write_file, Danger, ErrorKind, SandboxPolicy, ToolOutcome,
    WriteMode,
};
use proptest::prelude::*;
use regex::Regex;

#[test]
fn adversarial_paths_are_confined() {
    println!("{}", common::checks::sandbox_confinement().unwrap());
}

#[test]
fn write_and_shell_tools_are_destructive() {
    for spec in atomic_tool_specs() {
        let expected = if matches!(spec.name.as_str(), "write_file" | "bash_exec") {
            Danger::Destructive
        } else {
            Danger::Safe
        };
        assert_eq!(spec.danger, expected, "{}", spec.name);
    }
}

fn check_cap(o: &ToolOutcome, cap: usize) -> Result<(), TestCaseError> {
    prop_assert!(o.content.len() <= cap, "{} > {cap}", o.content.len());
    if o.truncated {
        prop_assert!(o.content.len() + 4 > cap, "truncated at {} with cap {cap}", o.content.len());
    }
    if o.ok {
        prop_assert_eq!(o.error_kind, ErrorKind::None);
    }
    Ok(())
}

fn without_timing(mut o: ToolOutcome) -> ToolOutcome {
    o.duration_ms = 0;
    o
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn outputs_never_exceed_the_cap(
        lines in prop::collection::vec("[a-zé€ ]{0,80}", 0..300),
        cap in 4096usize..9000,
    ) {
        let tmp = tempfile::tempdir().unwrap();
        let policy = SandboxPolicy::new(tmp.path()).unwrap().with_output_cap(cap);
        let text = lines.join("\n");
        std::fs::write(tmp.path().join("data.txt"), &text).unwrap();
        for i in 0..(lines.len() / 20) {
            std::fs::create_dir_all(tmp.path().join(format!("dir{i}/nested"))).unwrap();
        }
        let windowed = read_file(&policy, "data.txt", Some(1), Some(100_000));
        check_cap(&windowed, cap)?;
        let whole = read_file(&policy, "data.txt", None, None);
        check_cap(&whole, cap)?;
        if text.len() > cap {
            prop_assert_eq!(whole.error_kind, ErrorKind::TooLarge);
            prop_assert!(windowed.truncated);
        } else {
            prop_assert_eq!(whole.content, text.clone());
        }
        check_cap(&list_dir(&policy, ".", 4), cap)?;
        check_cap(&bash_exec("cat data.txt; cat data.txt", ".", &policy), cap)?;
    }

    #[test]
    fn non_shell_tools_are_deterministic(
        files in prop::collection::btree_map("[a-c]{1,3}(/[a-c]{1,3}){0,2}", "[a-c\n ]{0,200}", 1..12),
        needle in "[a-c]{1,2}",
    ) {
        let tmp = tempfile::tempdir().unwrap();
        let policy = SandboxPolicy::new(tmp.path()).unwrap();
        for (path, body) in &files {
            let o = write_file(&policy, format!("f/{path}.txt"), body, WriteMode::Overwrite);
            prop_assume!(o.ok);
        }
        let first = files.keys().next().unwrap();
        let read = |_: ()| without_timing(read_file(&policy, format!("f/{first}.txt"), None, None));
        prop_assert_eq!(read(()), read(()));
        let list = |_: ()| without_timing(list_dir(&policy, "f", 5));
        prop_assert_eq!(list(()), list(()));
        let a = grep_search(&policy, &needle, ".", true, 1000).unwrap();
        let b = grep_search(&policy, &needle, ".", true, 1000).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn regex_hits_contain_a_match(
        lines in prop::collection::vec("[ab0-9 ]{0,30}", 1..60),
        pattern in prop::sample::select(vec!["a+b", "[0-9]{2}", "^a", "b$", "a.b", "(ab|ba)"]),
    ) {
        let tmp = tempfile::tempdir().unwrap();
        let policy = SandboxPolicy::new(tmp.path()).unwrap();
        std::fs::write(tmp.path().join("x.txt"), lines.join("\n")).unwrap();
        let re = Regex::new(pattern).unwrap();
        let hits = grep_search(&policy, pattern, ".", false, 10_000).unwrap();
        let expected = lines.iter().filter(|l| re.is_match(l)).count();
        prop_assert_eq!(hits.len(), expected);
        for h in &hits {
            prop_assert!(re.is_match(&h.line_text));
            prop_assert_eq!(&lines[h.line_number - 1], &h.line_text);
        }
    }
}
