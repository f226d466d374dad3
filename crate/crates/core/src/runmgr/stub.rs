//! A stand-in solver that reads a case, prints an OpenFOAM-shaped log and
//! writes an end-time directory.
//!
//! Modes come from `--mode` or the controlDict entry `stubMode`:
//! `success`, `fatal-once` (fails on the first run in a case, then
//! succeeds), `fatal-always`, `slow` (sleeps `stubStepDelay` seconds per
//! step). Scalar fields in `0/` are written to the end time scaled by
//! `1 + 0.1 k_in - 0.5 (C1 - 1.44)`, where `k_in` is the first inlet patch
//! value of `0/k` and `C1` comes from the k-epsilon coefficients, so edits
//! to either show up in the results. Coordinate fields (`C`, `Cx`, `Cy`,
//! `Cz`) are copied unchanged.

use std::io::Write;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::foamdict::{
    field_from_file, format_number, get_path, read_dict, serialize_dict, set_path_in_place, FoamFile,
    FoamValue, InternalField, KeyPath,
};

pub const STUB_NAME: &str = "stubFoam";
pub const FATAL_ONCE_MARKER: &str = ".stub-fatal-once";
const MAX_STEPS: usize = 1000;
const COORDINATE_FIELDS: [&str; 4] = ["C", "Cx", "Cy", "Cz"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StubMode {
    Success,
    FatalOnce,
    FatalAlways,
    Slow,
}

impl std::str::FromStr for StubMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "success" => Ok(StubMode::Success),
            "fatal-once" => Ok(StubMode::FatalOnce),
            "fatal-always" => Ok(StubMode::FatalAlways),
            "slow" => Ok(StubMode::Slow),
            other => Err(format!("unknown stub mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct StubOptions {
    pub mode: Option<StubMode>,
    pub step_delay: Option<Duration>,
}

impl StubOptions {
    pub fn from_args(args: &[String]) -> Result<Self, String> {
        let mut o = StubOptions::default();
        let mut it = args.iter();
        while let Some(a) = it.next() {
            match a.as_str() {
                "--mode" => o.mode = Some(it.next().ok_or("--mode needs a value")?.parse()?),
                "--step-delay" => {
                    let v: f64 = it
                        .next()
                        .ok_or("--step-delay needs seconds")?
                        .parse()
                        .map_err(|e| format!("--step-delay: {e}"))?;
                    o.step_delay = Some(Duration::from_secs_f64(v.max(0.0)));
                }
                // OpenFOAM-style flags such as -case or -parallel are accepted and ignored.
                _ => {}
            }
        }
        Ok(o)
    }
}

/// Writes an executable `stubFoam` wrapper into `bin_dir` that re-enters
/// `exe` with `exe_args` followed by the solver arguments.
pub fn install(bin_dir: &Path, exe: &Path, exe_args: &[&str]) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(bin_dir)?;
    let path = bin_dir.join(STUB_NAME);
    let quote = |s: &str| format!("'{}'", s.replace('\'', "'\\''"));
    let args: Vec<String> = exe_args.iter().map(|a| quote(a)).collect();
    let script = format!(
        "#!/bin/sh\nexec {} {} \"$@\"\n",
        quote(&exe.to_string_lossy()),
        args.join(" ")
    );
    std::fs::write(&path, script)?;
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755))?;
    Ok(path)
}

/// Entry point for binaries that double as the stub: when the first argument
/// is `stub-solver`, runs the stub in the current directory and exits.
pub fn dispatch_if_requested() {
    let args: Vec<String> = std::env::args().collect();
    if args.get(1).map(String::as_str) == Some("stub-solver") {
        std::process::exit(main_with_args(&args[2..]));
    }
}

pub fn main_with_args(args: &[String]) -> i32 {
    let opts = match StubOptions::from_args(args) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{STUB_NAME}: {e}");
            return 2;
        }
    };
    let cwd = std::env::current_dir().unwrap_or_else(|_| PathBuf::from("."));
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    run(&cwd, &opts, &mut out)
}

fn banner(out: &mut dyn Write, case: &Path) -> std::io::Result<()> {
    let name = case.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    writeln!(out, "/*---------------------------------------------------------------------------*\\")?;
    writeln!(out, "  =========                 |")?;
    writeln!(out, "  \\\\      /  F ield         | {STUB_NAME}: stand-in solver")?;
    writeln!(out, "   \\\\    /   O peration     |")?;
    writeln!(out, "    \\\\  /    A nd           |")?;
    writeln!(out, "     \\\\/     M anipulation  |")?;
    writeln!(out, "\\*---------------------------------------------------------------------------*/")?;
    writeln!(out, "Build  : stub")?;
    writeln!(out, "Exec   : {STUB_NAME}")?;
    writeln!(out, "Case   : {name}")?;
    writeln!(out, "nProcs : 1")?;
    writeln!(out, "sigFpe : Enabling floating point exception trapping (FOAM_SIGFPE).")?;
    writeln!(out)?;
    writeln!(out, "Create time\n")?;
    writeln!(out, "Create mesh for time = 0\n")
}

fn fatal_io(out: &mut dyn Write, message: &str, file: &str) -> i32 {
    let _ = write!(
        out,
        "\n\n--> FOAM FATAL IO ERROR: \n{message}\n\nfile: {file}\n\n    From function Foam::{STUB_NAME}::readControls()\n    in file {STUB_NAME}.C at line 42.\n\nFOAM exiting\n\n"
    );
    1
}

fn fatal(out: &mut dyn Write, message: &str) -> i32 {
    let _ = write!(
        out,
        "\n\n--> FOAM FATAL ERROR: \n{message}\n\n    From function Foam::{STUB_NAME}::solve()\n    in file {STUB_NAME}.C at line 97.\n\nFOAM exiting\n\n"
    );
    1
}

fn number_at(file: &FoamFile, path: &str) -> Option<f64> {
    let kp: KeyPath = path.parse().ok()?;
    get_path(file, &kp).ok()?.as_f64()
}

/// Six significant digits, rendered without trailing zeros.
pub fn format_time(t: f64) -> String {
    let rounded: f64 = format!("{t:.5e}").parse().unwrap_or(t);
    format_number(rounded)
}

fn inlet_k(case: &Path) -> f64 {
    let Ok(file) = read_dict(&case.join("0/k")) else { return 0.0 };
    let Ok(field) = field_from_file(&file) else { return 0.0 };
    let Some(FoamValue::Dict(bf)) = file.body.get("boundaryField") else { return 0.0 };
    for e in &bf.entries {
        if !e.keyword.to_ascii_lowercase().contains("inlet") {
            continue;
        }
        if let Some(FoamValue::Seq(items)) = field.boundary.get(&e.keyword).and_then(|d| d.get("value")) {
            if let [FoamValue::Token(u), FoamValue::Number(x)] = items.as_slice() {
                if u == "uniform" {
                    return *x;
                }
            }
        }
    }
    0.0
}

fn c1(case: &Path) -> f64 {
    ["constant/turbulenceProperties", "constant/momentumTransport"]
        .iter()
        .filter_map(|f| read_dict(&case.join(f)).ok())
        .find_map(|d| number_at(&d, "RAS/kEpsilonCoeffs/C1"))
        .unwrap_or(1.44)
}

pub fn response_factor(k_in: f64, c1: f64) -> f64 {
    1.0 + 0.1 * k_in - 0.5 * (c1 - 1.44)
}

pub fn run(case: &Path, opts: &StubOptions, out: &mut dyn Write) -> i32 {
    let _ = banner(out, case);
    let control_path = case.join("system/controlDict");
    let control = match read_dict(&control_path) {
        Ok(c) => c,
        Err(e) => return fatal_io(out, &format!("cannot read controlDict: {e}"), "system/controlDict"),
    };
    let mode = opts.mode.or_else(|| {
        let kp: KeyPath = "stubMode".parse().ok()?;
        get_path(&control, &kp).ok()?.as_word()?.parse().ok()
    });
    let mode = mode.unwrap_or(StubMode::Success);
    let start = number_at(&control, "startTime").unwrap_or(0.0);
    let Some(end) = number_at(&control, "endTime") else {
        return fatal_io(out, "Entry 'endTime' not found or not a number", "system/controlDict/endTime");
    };
    let dt = number_at(&control, "deltaT").unwrap_or(0.0);
    if !(dt > 0.0) {
        return fatal_io(
            out,
            &format!("Entry 'deltaT' must be positive, found {}", format_number(dt)),
            "system/controlDict/deltaT",
        );
    }
    if !(end > start) {
        return fatal_io(
            out,
            &format!("endTime {} is not after startTime {}", format_number(end), format_number(start)),
            "system/controlDict/endTime",
        );
    }
    let delay = opts.step_delay.or_else(|| {
        number_at(&control, "stubStepDelay").map(|s| Duration::from_secs_f64(s.max(0.0)))
    });
    let fail = match mode {
        StubMode::FatalAlways => true,
        StubMode::FatalOnce => {
            let marker = case.join(FATAL_ONCE_MARKER);
            if marker.exists() {
                false
            } else {
                let _ = std::fs::write(&marker, "");
                true
            }
        }
        _ => false,
    };

    let mut steps = ((end - start) / dt).round() as usize;
    if steps > MAX_STEPS {
        let _ = writeln!(out, "--> FOAM Warning : stub step count capped at {MAX_STEPS}");
        steps = MAX_STEPS;
    }
    let _ = writeln!(out, "Starting time loop\n");
    let _ = writeln!(out, "Courant Number mean: 0 max: 0");
    for i in 1..=steps {
        let t = start + dt * i as f64;
        let co_max = 0.2 + 0.3 * (i as f64 / steps as f64);
        let _ = writeln!(out, "Time = {}\n", format_time(t));
        let _ = writeln!(out, "Courant Number mean: {} max: {}", format_time(co_max / 4.0), format_time(co_max));
        let _ = writeln!(
            out,
            "smoothSolver:  Solving for T, Initial residual = {}, Final residual = {}, No Iterations 2",
            format_time(0.1 / i as f64),
            format_time(1e-4 / i as f64)
        );
        let _ = writeln!(
            out,
            "time step continuity errors : sum local = {}, global = {}, cumulative = {}",
            format_time(1e-8 / i as f64),
            format_time(-1e-10 / i as f64),
            format_time(-1e-10)
        );
        let _ = writeln!(out, "ExecutionTime = {} s  ClockTime = {} s\n", format_time(0.01 * i as f64), i / 100);
        if fail && i == steps.min(2) {
            return fatal(out, "Maximum number of iterations exceeded in the stub pressure solver");
        }
        if mode == StubMode::Slow {
            std::thread::sleep(delay.unwrap_or(Duration::from_millis(200)));
        } else if let Some(d) = delay {
            std::thread::sleep(d);
        }
        let _ = out.flush();
    }
    if let Err(e) = write_results(case, &format_time(end)) {
        return fatal(out, &format!("cannot write results: {e}"));
    }
    let _ = writeln!(out, "End\n");
    0
}

fn write_results(case: &Path, time: &str) -> Result<(), Box<dyn std::error::Error>> {
    let src = case.join("0");
    let dst = case.join(time);
    std::fs::create_dir_all(&dst)?;
    let factor = response_factor(inlet_k(case), c1(case));
    let mut names: Vec<_> = std::fs::read_dir(&src)?
        .filter_map(Result::ok)
        .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for name in names {
        let from = src.join(&name);
        let to = dst.join(&name);
        let Ok(mut file) = read_dict(&from) else {
            std::fs::copy(&from, &to)?;
            continue;
        };
        let scalar = field_from_file(&file).ok().filter(|f| f.internal.len().is_some());
        match scalar {
            Some(f) if !COORDINATE_FIELDS.contains(&name.as_str()) => {
                let scaled = match f.internal {
                    InternalField::Uniform(v) => InternalField::Uniform(v * factor),
                    InternalField::Nonuniform(v) => InternalField::Nonuniform(v.iter().map(|x| x * factor).collect()),
                    other => other,
                };
                set_path_in_place(&mut file, &"internalField".parse()?, scaled.to_value())?;
            }
            _ => {}
        }
        if file.header.is_some() {
            set_path_in_place(&mut file, &"FoamFile/location".parse()?, FoamValue::Str(time.to_string()))?;
        }
        std::fs::write(&to, serialize_dict(&file))?;
    }
    Ok(())
}
