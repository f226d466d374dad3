//! Sweep the inlet turbulent kinetic energy over three values and compare
//! each member's temperature profile with the experimental one.

#[path = "support/mod.rs"]
mod support;

use std::path::Path;

use flamepilot::foamdict::FoamValue;
use flamepilot::runmgr::stub;
use flamepilot::study::{apply_edit, run_study, CompareSpec, ParameterEdit, StudyEvent, StudySpec};

fn main() {
    stub::dispatch_if_requested();
    let sandbox = support::Sandbox::with_stub();
    let case = sandbox.copy_in(&support::fixtures().join("cases/jhc-mild"), "base");
    apply_edit(&case, &ParameterEdit::new("system/controlDict", "deltaT".parse().unwrap(), FoamValue::Number(0.001))).unwrap();
    std::fs::create_dir_all(sandbox.root().join("experimental")).unwrap();
    std::fs::copy(
        support::fixtures().join("experimental/jhc-T-30mm.dat"),
        sandbox.root().join("experimental/T.dat"),
    )
    .unwrap();

    let spec = StudySpec {
        base_case: "base".into(),
        dict_file: "0/k".into(),
        key_path: "boundaryField/fuelInlet/value".parse().unwrap(),
        values: vec![0.5.into(), 1.0.into(), 1.5.into()],
        run_command: "stubFoam".into(),
        label: "k-inlet".into(),
        compare: Some(CompareSpec { field: "T".into(), time: "0.01".into(), experimental: "experimental/T.dat".into() }),
    };
    let result = run_study(&spec, &sandbox.policy, Path::new("studies"), 20, |e| {
        if let StudyEvent::MemberFinished { index, result, .. } = e {
            eprintln!("member {index}: {result}");
        }
    })
    .unwrap();
    print!("{}", result.render_table());
}
