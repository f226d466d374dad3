//! Discover the bundled skills, rank them for a query and load the winner.

use flamepilot::skills::{discover_skills, load_skill, match_skills};

fn main() {
    let query = std::env::args().nth(1).unwrap_or_else(|| "set up a deepflame MILD case".into());
    let registry = discover_skills(&flamepilot::scenario::fixtures_dir().join("skills")).unwrap();
    println!("index:\n{}", registry.index());
    for w in &registry.warnings {
        println!("warning: {}: {}", w.path, w.reason);
    }
    let ranked = match_skills(&registry, &query);
    println!("\nquery {query:?} -> {ranked:?}");
    if let Some(best) = ranked.first() {
        let block = load_skill(&registry, best).unwrap();
        println!("\n{}", block.lines().take(12).collect::<Vec<_>>().join("\n"));
    }
}
