//! Rank tutorial cases by literal pattern hits.
//!
//! `cargo run --example find_tutorials -- reactingFoam EDC`

use flamepilot::retrieval::find_cases;

fn main() {
    let mut patterns: Vec<String> = std::env::args().skip(1).collect();
    if patterns.is_empty() {
        patterns = vec!["kEpsilon".into(), "EDC".into(), "coflow".into()];
    }
    let root = flamepilot::scenario::fixtures_dir().join("tutorials");
    match find_cases(&root, &patterns, 5) {
        Ok(found) => {
            for m in found {
                println!(
                    "{:<40} score {}  solver {:<16} {:?}",
                    m.case_root,
                    m.score,
                    m.solver_hint.unwrap_or_else(|| "-".into()),
                    m.matched
                );
            }
        }
        Err(e) => eprintln!("{e}"),
    }
}
