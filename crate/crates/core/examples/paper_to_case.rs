//! Paper to configured case without a model in the loop: convert the paper,
//! validate a parameter sheet, map it to a checklist and apply the edits to a
//! clone of the base case.

use flamepilot::literature::{convert_pdf, sheet_to_checklist, validate_sheet, MappingTable};
use flamepilot::study::{apply_edit, clone_case};
use flamepilot::toolkit::SandboxPolicy;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = flamepilot::scenario::fixtures_dir();
    let tmp = tempfile::tempdir()?;
    flamepilot::scenario::prepare_workdir(&fixtures, tmp.path())?;
    let policy = SandboxPolicy::new(tmp.path())?;

    let converted = convert_pdf(&policy, "papers/jhc-mild.pdf", Some("cp {input} {output}"))?;
    println!("converted -> {} ({} bytes)", converted.output, converted.markdown.len());

    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(fixtures.join("papers/jhc-mild.sheet.json"))?)?;
    let sheet = validate_sheet(&doc)?;
    let table = MappingTable::load(&tmp.path().join("mapping/jhc.map"))?;
    let checklist = sheet_to_checklist(&sheet, &table);
    print!("{}", checklist.render());

    let case = policy.root.join("cases/jhc");
    clone_case(&fixtures.join("cases/jhc-mild"), &case)?;
    for edit in checklist.edits() {
        let file = apply_edit(&case, edit)?;
        println!("edited {}", policy.relative(&file));
    }
    Ok(())
}
