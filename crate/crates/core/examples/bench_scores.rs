//! Score recorded outcomes, then run a three-case suite against the stub.

#[path = "support/mod.rs"]
mod support;

use flamepilot::bench::{aggregate, load_suite, run_suite, CaseOutcome, DEFAULT_THRESHOLD};
use flamepilot::runmgr::stub;

fn main() {
    stub::dispatch_if_requested();
    let fixtures = support::fixtures();

    let text = std::fs::read_to_string(fixtures.join("bench/recorded-outcomes.json")).unwrap();
    let recorded: Vec<CaseOutcome> = serde_json::from_str(&text).unwrap();
    let rescored: Vec<CaseOutcome> = recorded
        .iter()
        .map(|o| CaseOutcome::scored(o.id.clone(), o.executable, o.nmse, DEFAULT_THRESHOLD))
        .collect();
    let summary = aggregate(&rescored, DEFAULT_THRESHOLD).unwrap();
    println!("recorded outcomes:\n{}", summary.render_table(&rescored));

    let sandbox = support::Sandbox::with_stub();
    sandbox.copy_in(&fixtures.join("bench"), "bench");
    let suite = load_suite(&sandbox.root().join("bench/suite.json")).unwrap();
    let outcomes = run_suite(&sandbox.policy, &suite, DEFAULT_THRESHOLD);
    let summary = aggregate(&outcomes, DEFAULT_THRESHOLD).unwrap();
    println!("stub suite:\n{}", summary.render_table(&outcomes));
}
