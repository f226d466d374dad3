use std::fmt;
use std::path::PathBuf;

/// One value in an OpenFOAM dictionary tree.
///
/// `Seq` holds a whitespace-separated run of values written under a single
/// entry, such as `nu [0 2 -1 0 0 0 0] 1e-05;` or
/// `internalField nonuniform List<scalar> 3(1 2 3);`.
#[derive(Debug, Clone, PartialEq)]
pub enum FoamValue {
    Token(String),
    Number(f64),
    /// Quoted text, stored without the surrounding quotes and with escape
    /// sequences left as written.
    Str(String),
    List(FoamList),
    Dict(FoamDict),
    Seq(Vec<FoamValue>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ListDelim {
    Paren,
    Bracket,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoamList {
    pub items: Vec<FoamValue>,
    /// Length prefix as written (`3(1 2 3)`), if any.
    pub declared_len: Option<usize>,
    pub delim: ListDelim,
}

impl FoamList {
    pub fn new(items: Vec<FoamValue>) -> Self {
        Self {
            items,
            declared_len: None,
            delim: ListDelim::Paren,
        }
    }

    pub fn with_len_prefix(items: Vec<FoamValue>) -> Self {
        Self {
            declared_len: Some(items.len()),
            items,
            delim: ListDelim::Paren,
        }
    }

    pub fn bracket(items: Vec<FoamValue>) -> Self {
        Self {
            items,
            declared_len: None,
            delim: ListDelim::Bracket,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FoamDict {
    pub entries: Vec<FoamEntry>,
    /// Comments after the last entry, before the closing brace (or end of file).
    pub trailer: Vec<String>,
}

impl FoamDict {
    pub fn new() -> Self {
        Self::default()
    }

    /// Last entry with this keyword. Later duplicates win, as in the solvers.
    pub fn get(&self, keyword: &str) -> Option<&FoamValue> {
        self.entries
            .iter()
            .rev()
            .find(|e| e.keyword == keyword)
            .map(|e| &e.value)
    }

    pub fn get_mut(&mut self, keyword: &str) -> Option<&mut FoamValue> {
        self.entries
            .iter_mut()
            .rev()
            .find(|e| e.keyword == keyword)
            .map(|e| &mut e.value)
    }

    pub fn push(&mut self, keyword: impl Into<String>, value: FoamValue) {
        self.entries.push(FoamEntry::new(keyword, value));
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoamEntry {
    pub keyword: String,
    pub value: FoamValue,
    /// Comments that preceded the entry, verbatim including delimiters.
    pub trivia: Vec<String>,
}

impl FoamEntry {
    pub fn new(keyword: impl Into<String>, value: FoamValue) -> Self {
        Self {
            keyword: keyword.into(),
            value,
            trivia: Vec::new(),
        }
    }

    /// `#include`, `#includeEtc`, `#inputMode` and friends. The value holds the
    /// rest of the directive line verbatim.
    pub fn is_directive(&self) -> bool {
        self.keyword.starts_with('#')
    }

    pub fn trivia_text(&self) -> String {
        self.trivia.join("\n")
    }
}

/// A parsed dictionary file: optional `FoamFile` header plus top-level entries.
#[derive(Debug, Clone, Default)]
pub struct FoamFile {
    pub header: Option<FoamEntry>,
    pub body: FoamDict,
    pub source_path: Option<PathBuf>,
}

impl PartialEq for FoamFile {
    fn eq(&self, other: &Self) -> bool {
        self.header == other.header && self.body == other.body
    }
}

impl FoamFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[FoamEntry] {
        &self.body.entries
    }

    pub fn header_dict(&self) -> Option<&FoamDict> {
        match &self.header {
            Some(FoamEntry {
                value: FoamValue::Dict(d),
                ..
            }) => Some(d),
            _ => None,
        }
    }
}

impl FoamValue {
    pub fn token(s: impl Into<String>) -> Self {
        FoamValue::Token(s.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            FoamValue::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_word(&self) -> Option<&str> {
        match self {
            FoamValue::Token(s) | FoamValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_dict(&self) -> Option<&FoamDict> {
        match self {
            FoamValue::Dict(d) => Some(d),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&FoamList> {
        match self {
            FoamValue::List(l) => Some(l),
            _ => None,
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(
            self,
            FoamValue::Token(_) | FoamValue::Number(_) | FoamValue::Str(_)
        )
    }

    /// Single-line rendering used in tool output and reports.
    pub fn render_inline(&self) -> String {
        super::serialize::render_value(self, 0).replace('\n', " ")
    }
}

impl From<f64> for FoamValue {
    fn from(v: f64) -> Self {
        FoamValue::Number(v)
    }
}

impl fmt::Display for FoamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::serialize::render_value(self, 0))
    }
}

/// Shortest text that reads back to the same `f64`; integral values print
/// without a fractional part.
pub fn format_number(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if v == v.trunc() && v.abs() < 1e15 {
        if v == 0.0 {
            return "0".into();
        }
        return format!("{}", v as i64);
    }
    format!("{v:?}")
}

/// True for lexemes OpenFOAM reads as a scalar: optional sign, digits with an
/// optional fraction, optional exponent. `inf`/`nan` stay words.
pub fn looks_numeric(s: &str) -> bool {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - int_start;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        digits += i - frac_start;
    }
    if digits == 0 {
        return false;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        let exp_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return false;
        }
    }
    i == b.len()
}

/// JSON form: numbers stay numbers, everything else is its inline text
/// (`"kEpsilon"`, `"uniform (0 0 1)"`). Strings are parsed back as values.
impl serde::Serialize for FoamValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            FoamValue::Number(n) if n.is_finite() => s.serialize_f64(*n),
            other => s.serialize_str(&other.render_inline()),
        }
    }
}

impl<'de> serde::Deserialize<'de> for FoamValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Number(n) => n
                .as_f64()
                .map(FoamValue::Number)
                .ok_or_else(|| serde::de::Error::custom("number out of range")),
            serde_json::Value::String(s) => {
                Ok(super::parse_value(&s).unwrap_or(FoamValue::Token(s)))
            }
            serde_json::Value::Bool(b) => Ok(FoamValue::token(if b { "true" } else { "false" })),
            other => Err(serde::de::Error::custom(format!(
                "expected a number or string, found {other}"
            ))),
        }
    }
}
