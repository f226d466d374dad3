//! Parse a controlDict, change two entries by key path and print the result.
//! Comments and layout outside the edited lines survive untouched.

use flamepilot::foamdict::{get_path, read_dict, serialize_dict, set_path, FoamValue, KeyPath};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = flamepilot::scenario::fixtures_dir().join("cases/jhc-mild/system/controlDict");
    let file = read_dict(&path)?;

    let end: KeyPath = "endTime".parse()?;
    let dt: KeyPath = "deltaT".parse()?;
    println!("endTime = {}", get_path(&file, &end)?.render_inline());
    println!("deltaT  = {}", get_path(&file, &dt)?.render_inline());

    let edited = set_path(&file, &end, FoamValue::Number(0.05))?;
    let edited = set_path(&edited, &dt, FoamValue::Number(1e-4))?;

    let before = serialize_dict(&file);
    let after = serialize_dict(&edited);
    for (a, b) in before.lines().zip(after.lines()).filter(|(a, b)| a != b) {
        println!("- {a}\n+ {b}");
    }
    Ok(())
}
