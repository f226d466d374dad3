//! The full scripted walkthrough: paper, sheet, checklist, configured case,
//! a failing first run, the fix, and a three-member study with comparison.

use flamepilot::orchestrator::EventKind;
use flamepilot::runmgr::stub;
use flamepilot::scenario;
use flamepilot::study::StudyResult;

fn main() {
    stub::dispatch_if_requested();
    let tmp = tempfile::tempdir().unwrap();
    let exe = std::env::current_exe().unwrap();
    let session = scenario::run(&scenario::fixtures_dir(), tmp.path(), Some(exe), "mini-mild").unwrap();

    for e in session.log() {
        match e.kind {
            EventKind::RunFinished => println!(
                "run {} attempt {}: {}",
                e.payload["run"]["case_root"], e.payload["attempt"], e.payload["run"]["diagnostic"]["kind"]
            ),
            EventKind::AssistantMsg => {
                if let Some(text) = e.payload["message"]["text"].as_str().filter(|t| !t.is_empty()) {
                    println!("model: {text}");
                }
            }
            _ => {}
        }
    }
    let report = std::fs::read_to_string(tmp.path().join("studies/k-inlet/report.json")).unwrap();
    let result: StudyResult = serde_json::from_str(&report).unwrap();
    print!("{}", result.render_table());
    println!("{} events, state {:?}", session.log().len(), session.state());
}
