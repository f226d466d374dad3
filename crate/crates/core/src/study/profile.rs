use std::path::Path;

use serde::{Deserialize, Serialize};

use super::StudyError;
use crate::foamdict::{parse_field, InternalField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub coordinate: f64,
    pub value: f64,
}

/// How sample positions are assigned: from a coordinate field next to the
/// data field when one exists, otherwise by cell index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileAxis {
    #[default]
    ByIndex,
}

pub const COORDINATE_FIELD: &str = "Cx";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub variable: String,
    pub rms_error: f64,
    pub n_points: usize,
    /// Experimental points outside the simulated coordinate range.
    pub n_clipped: usize,
    /// (coordinate, sim, exp)
    pub per_point: Vec<(f64, f64, f64)>,
}

fn read_scalar(path: &Path) -> Result<InternalField, StudyError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => StudyError::FieldMissing(path.display().to_string()),
        _ => StudyError::Io(e),
    })?;
    Ok(parse_field(&text)?.internal)
}

pub fn extract_profile(
    case: &Path,
    field_name: &str,
    _axis: ProfileAxis,
    time_dir: &str,
) -> Result<Vec<ProfileSample>, StudyError> {
    let dir = case.join(time_dir);
    let values = match read_scalar(&dir.join(field_name))? {
        InternalField::Uniform(v) => {
            return Ok(vec![ProfileSample {
                coordinate: 0.0,
                value: v,
            }])
        }
        InternalField::Nonuniform(v) => v,
        InternalField::Opaque(_) => {
            return Err(StudyError::InvalidSpec(format!("{field_name} is not a scalar field")))
        }
    };
    let coord_path = dir.join(COORDINATE_FIELD);
    let coords: Vec<f64> = if field_name != COORDINATE_FIELD && coord_path.is_file() {
        match read_scalar(&coord_path)? {
            InternalField::Nonuniform(c) if c.len() == values.len() => c,
            InternalField::Uniform(c) => vec![c; values.len()],
            other => {
                return Err(StudyError::InvalidSpec(format!(
                    "coordinate field has {:?} points, {field_name} has {}",
                    other.len(),
                    values.len()
                )))
            }
        }
    } else {
        (0..values.len()).map(|i| i as f64).collect()
    };
    let mut samples: Vec<ProfileSample> = coords
        .into_iter()
        .zip(values)
        .map(|(coordinate, value)| ProfileSample { coordinate, value })
        .collect();
    samples.sort_by(|a, b| a.coordinate.total_cmp(&b.coordinate));
    Ok(samples)
}

/// Two-column numeric text (coordinate, value); `#` starts a comment line.
pub fn parse_profile_text(text: &str) -> Result<Vec<ProfileSample>, StudyError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
        let bad = |reason: &str| StudyError::BadData {
            line: i + 1,
            reason: reason.to_string(),
        };
        if cols.len() != 2 {
            return Err(bad("expected two columns"));
        }
        let coordinate: f64 = cols[0].parse().map_err(|_| bad("coordinate is not a number"))?;
        let value: f64 = cols[1].parse().map_err(|_| bad("value is not a number"))?;
        if !coordinate.is_finite() || !value.is_finite() {
            return Err(bad("non-finite number"));
        }
        out.push(ProfileSample { coordinate, value });
    }
    out.sort_by(|a, b| a.coordinate.total_cmp(&b.coordinate));
    Ok(out)
}

fn interpolate(sim: &[ProfileSample], x: f64) -> Option<f64> {
    if sim.len() == 1 {
        return Some(sim[0].value);
    }
    let first = sim.first()?;
    let last = sim.last()?;
    if x < first.coordinate || x > last.coordinate {
        return None;
    }
    for w in sim.windows(2) {
        let (a, b) = (w[0], w[1]);
        if x == a.coordinate {
            return Some(a.value);
        }
        if x == b.coordinate {
            return Some(b.value);
        }
        if x > a.coordinate && x <= b.coordinate {
            let t = (x - a.coordinate) / (b.coordinate - a.coordinate);
            return Some(a.value + t * (b.value - a.value));
        }
    }
    Some(last.value)
}

/// Linear interpolation of `sim` onto the experimental coordinates, then RMS
/// of the differences. A single-sample simulation counts as constant.
pub fn compare_profiles(
    variable: &str,
    sim: &[ProfileSample],
    exp: &[ProfileSample],
) -> Result<ComparisonReport, StudyError> {
    if sim.is_empty() || exp.is_empty() {
        return Err(StudyError::EmptyProfile);
    }
    let mut sim = sim.to_vec();
    sim.sort_by(|a, b| a.coordinate.total_cmp(&b.coordinate));
    let mut per_point = Vec::new();
    let mut n_clipped = 0;
    for e in exp {
        match interpolate(&sim, e.coordinate) {
            Some(s) => per_point.push((e.coordinate, s, e.value)),
            None => n_clipped += 1,
        }
    }
    if per_point.is_empty() {
        return Err(StudyError::EmptyProfile);
    }
    let mse = per_point.iter().map(|(_, s, e)| (s - e) * (s - e)).sum::<f64>() / per_point.len() as f64;
    Ok(ComparisonReport {
        variable: variable.to_string(),
        rms_error: mse.sqrt(),
        n_points: per_point.len(),
        n_clipped,
        per_point,
    })
}
