use std::collections::BTreeMap;

use super::value::{FoamDict, FoamFile, FoamList, FoamValue, ListDelim};
use super::{parse_dict, FoamDictError};

#[derive(Debug, Clone, PartialEq)]
pub enum InternalField {
    Uniform(f64),
    Nonuniform(Vec<f64>),
    /// Vector or tensor data, kept as written.
    Opaque(FoamValue),
}

impl InternalField {
    pub fn len(&self) -> Option<usize> {
        match self {
            InternalField::Uniform(_) => Some(1),
            InternalField::Nonuniform(v) => Some(v.len()),
            InternalField::Opaque(_) => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    /// Values expanded to `n` points; uniform fields repeat their value.
    pub fn expand(&self, n: usize) -> Option<Vec<f64>> {
        match self {
            InternalField::Uniform(v) => Some(vec![*v; n]),
            InternalField::Nonuniform(v) => Some(v.clone()),
            InternalField::Opaque(_) => None,
        }
    }

    pub fn to_value(&self) -> FoamValue {
        match self {
            InternalField::Uniform(v) => {
                FoamValue::Seq(vec![FoamValue::token("uniform"), FoamValue::Number(*v)])
            }
            InternalField::Nonuniform(vals) => FoamValue::Seq(vec![
                FoamValue::token("nonuniform"),
                FoamValue::token("List<scalar>"),
                FoamValue::List(FoamList::with_len_prefix(
                    vals.iter().map(|v| FoamValue::Number(*v)).collect(),
                )),
            ]),
            InternalField::Opaque(v) => v.clone(),
        }
    }
}

/// A scalar volume field file (`0/T`, `0.5/k`, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldData {
    pub dimensions: [i32; 7],
    pub internal: InternalField,
    pub boundary: BTreeMap<String, FoamDict>,
}

fn invalid(msg: impl Into<String>) -> FoamDictError {
    FoamDictError::InvalidField(msg.into())
}

pub fn parse_field(text: &str) -> Result<FieldData, FoamDictError> {
    let file = parse_dict(text)?;
    field_from_file(&file)
}

pub fn field_from_file(file: &FoamFile) -> Result<FieldData, FoamDictError> {
    let dims = file.body.get("dimensions").ok_or_else(|| invalid("missing 'dimensions'"))?;
    let dimensions = parse_dimensions(dims)?;
    let internal = file
        .body
        .get("internalField")
        .ok_or_else(|| invalid("missing 'internalField'"))
        .and_then(parse_internal)?;
    let mut boundary = BTreeMap::new();
    if let Some(FoamValue::Dict(b)) = file.body.get("boundaryField") {
        for e in &b.entries {
            if let FoamValue::Dict(d) = &e.value {
                boundary.insert(e.keyword.clone(), d.clone());
            }
        }
    }
    Ok(FieldData {
        dimensions,
        internal,
        boundary,
    })
}

fn parse_dimensions(v: &FoamValue) -> Result<[i32; 7], FoamDictError> {
    let list = match v {
        FoamValue::List(l) if l.delim == ListDelim::Bracket => l,
        _ => return Err(invalid("'dimensions' must be a [..] list")),
    };
    if list.items.len() != 7 {
        return Err(invalid(format!(
            "'dimensions' needs 7 exponents, found {}",
            list.items.len()
        )));
    }
    let mut out = [0i32; 7];
    for (slot, item) in out.iter_mut().zip(&list.items) {
        match item.as_f64() {
            Some(x) if x.fract() == 0.0 => *slot = x as i32,
            _ => return Err(invalid("'dimensions' exponents must be integers")),
        }
    }
    Ok(out)
}

fn parse_internal(v: &FoamValue) -> Result<InternalField, FoamDictError> {
    let FoamValue::Seq(items) = v else {
        return Err(invalid("'internalField' must start with uniform/nonuniform"));
    };
    match items.first().and_then(FoamValue::as_word) {
        Some("uniform") => match items.get(1) {
            Some(FoamValue::Number(x)) if items.len() == 2 => Ok(InternalField::Uniform(*x)),
            Some(_) => Ok(InternalField::Opaque(v.clone())),
            None => Err(invalid("'uniform' without a value")),
        },
        Some("nonuniform") => {
            let list = items.iter().skip(1).find_map(FoamValue::as_list);
            let Some(list) = list else {
                return Err(invalid("'nonuniform' without a value list"));
            };
            let is_scalar = items
                .get(1)
                .and_then(FoamValue::as_word)
                .is_none_or(|w| w == "List<scalar>");
            if !is_scalar {
                return Ok(InternalField::Opaque(v.clone()));
            }
            if let Some(declared) = list.declared_len {
                if declared != list.items.len() {
                    return Err(FoamDictError::LengthMismatch {
                        declared,
                        actual: list.items.len(),
                    });
                }
            }
            let mut vals = Vec::with_capacity(list.items.len());
            for it in &list.items {
                match it.as_f64() {
                    Some(x) => vals.push(x),
                    None => return Ok(InternalField::Opaque(v.clone())),
                }
            }
            Ok(InternalField::Nonuniform(vals))
        }
        _ => Err(invalid("'internalField' must start with uniform/nonuniform")),
    }
}
