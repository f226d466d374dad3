use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::value::{FoamDict, FoamEntry, FoamFile, FoamValue};
use super::FoamDictError;

/// Address of a nested entry, written `a/b/c`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KeyPath(Vec<String>);

impl KeyPath {
    pub fn new<I, S>(segments: I) -> Result<Self, FoamDictError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let segs: Vec<String> = segments.into_iter().map(Into::into).collect();
        if segs.is_empty() || segs.iter().any(|s| s.is_empty()) {
            return Err(FoamDictError::InvalidPath(segs.join("/")));
        }
        Ok(Self(segs))
    }

    pub fn segments(&self) -> &[String] {
        &self.0
    }

    pub fn last(&self) -> &str {
        self.0.last().expect("non-empty key path")
    }

    fn prefix(&self, n: usize) -> String {
        self.0[..n].join("/")
    }
}

impl FromStr for KeyPath {
    type Err = FoamDictError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KeyPath::new(s.split('/'))
    }
}

impl fmt::Display for KeyPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("/"))
    }
}

impl Serialize for KeyPath {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for KeyPath {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn root_for<'a>(file: &'a FoamFile, path: &KeyPath) -> (&'a FoamDict, usize) {
    if path.segments()[0] == "FoamFile" {
        if let Some(h) = file.header_dict() {
            return (h, 1);
        }
    }
    (&file.body, 0)
}

pub fn get_path<'a>(file: &'a FoamFile, path: &KeyPath) -> Result<&'a FoamValue, FoamDictError> {
    let (mut dict, start) = root_for(file, path);
    if start == path.segments().len() {
        // The header itself is a dict, but it is not addressable as a value.
        return Err(FoamDictError::PathNotFound {
            resolved: String::new(),
        });
    }
    let segs = path.segments();
    for (i, seg) in segs.iter().enumerate().skip(start) {
        let Some(v) = dict.get(seg) else {
            return Err(FoamDictError::PathNotFound {
                resolved: path.prefix(i),
            });
        };
        if i + 1 == segs.len() {
            return Ok(v);
        }
        match v {
            FoamValue::Dict(d) => dict = d,
            _ => {
                return Err(FoamDictError::PathNotFound {
                    resolved: path.prefix(i + 1),
                })
            }
        }
    }
    unreachable!("loop returns on the last segment")
}

/// Returns an edited copy; the input is left untouched.
pub fn set_path(file: &FoamFile, path: &KeyPath, value: FoamValue) -> Result<FoamFile, FoamDictError> {
    let mut out = file.clone();
    set_path_in_place(&mut out, path, value)?;
    Ok(out)
}

pub fn set_path_in_place(file: &mut FoamFile, path: &KeyPath, value: FoamValue) -> Result<(), FoamDictError> {
    let segs = path.segments();
    let use_header = segs[0] == "FoamFile" && segs.len() > 1 && file.header_dict().is_some();
    let (mut dict, start): (&mut FoamDict, usize) = if use_header {
        match file.header.as_mut().map(|h| &mut h.value) {
            Some(FoamValue::Dict(d)) => (d, 1),
            _ => unreachable!("header checked above"),
        }
    } else {
        (&mut file.body, 0)
    };
    for i in start..segs.len() {
        let seg = &segs[i];
        if i + 1 == segs.len() {
            match dict.get_mut(seg) {
                Some(slot) => *slot = value,
                None => dict.entries.push(FoamEntry::new(seg.clone(), value)),
            }
            return Ok(());
        }
        if dict.get(seg).is_none() {
            dict.entries.push(FoamEntry::new(seg.clone(), FoamValue::Dict(FoamDict::new())));
        }
        match dict.get_mut(seg) {
            Some(FoamValue::Dict(d)) => dict = d,
            _ => {
                return Err(FoamDictError::PathConflict {
                    at: path.prefix(i + 1),
                })
            }
        }
    }
    Ok(())
}
