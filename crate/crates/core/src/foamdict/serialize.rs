//! Canonical text rendering.
//!
//! Entries are `keyword value;` with a single space, sub-dictionaries put the
//! opening brace on its own line, nesting indents by four spaces, and lists of
//! at most eight scalar items stay on one line.

use super::value::{format_number, FoamDict, FoamEntry, FoamFile, FoamList, FoamValue, ListDelim};

const INDENT: &str = "    ";
const INLINE_LIST_MAX: usize = 8;

pub fn serialize_dict(file: &FoamFile) -> String {
    let mut out = String::new();
    if let Some(h) = &file.header {
        write_entry(&mut out, h, 0);
    }
    write_entries(&mut out, &file.body, 0);
    out
}

fn pad(level: usize) -> String {
    INDENT.repeat(level)
}

fn write_entries(out: &mut String, dict: &FoamDict, level: usize) {
    for e in &dict.entries {
        write_entry(out, e, level);
    }
    for c in &dict.trailer {
        out.push_str(&pad(level));
        out.push_str(c);
        out.push('\n');
    }
}

fn write_entry(out: &mut String, e: &FoamEntry, level: usize) {
    let ind = pad(level);
    for c in &e.trivia {
        out.push_str(&ind);
        out.push_str(c);
        out.push('\n');
    }
    if e.is_directive() {
        out.push_str(&ind);
        out.push_str(&e.keyword);
        let rest = render_value(&e.value, level);
        if !rest.is_empty() {
            out.push(' ');
            out.push_str(&rest);
        }
        out.push('\n');
        return;
    }
    match &e.value {
        FoamValue::Dict(d) => {
            out.push_str(&ind);
            out.push_str(&e.keyword);
            out.push('\n');
            write_block(out, d, level);
            out.push('\n');
        }
        FoamValue::Seq(items) if items.is_empty() => {
            out.push_str(&ind);
            out.push_str(&e.keyword);
            out.push_str(";\n");
        }
        v => {
            out.push_str(&ind);
            out.push_str(&e.keyword);
            let r = render_value(v, level);
            if !r.starts_with('\n') {
                out.push(' ');
            }
            out.push_str(&r);
            out.push_str(";\n");
        }
    }
}

/// `{`, entries, `}` with the braces at `level`; no trailing newline.
fn write_block(out: &mut String, d: &FoamDict, level: usize) {
    out.push_str(&pad(level));
    out.push_str("{\n");
    write_entries(out, d, level + 1);
    out.push_str(&pad(level));
    out.push('}');
}

/// Renders a value whose first line continues the current line; continuation
/// lines are indented relative to `level`.
pub fn render_value(v: &FoamValue, level: usize) -> String {
    match v {
        FoamValue::Token(t) => t.clone(),
        FoamValue::Number(n) => format_number(*n),
        FoamValue::Str(s) => format!("\"{s}\""),
        FoamValue::List(l) => render_list(l, level),
        FoamValue::Dict(d) => {
            let mut s = String::from("\n");
            write_block(&mut s, d, level);
            s
        }
        FoamValue::Seq(items) => {
            let mut s = String::new();
            for (i, it) in items.iter().enumerate() {
                let r = render_value(it, level);
                if i > 0 && !r.starts_with('\n') {
                    s.push(' ');
                }
                s.push_str(&r);
            }
            s
        }
    }
}

fn render_list(l: &FoamList, level: usize) -> String {
    let (open, close) = match l.delim {
        ListDelim::Paren => ('(', ')'),
        ListDelim::Bracket => ('[', ']'),
    };
    let prefix = l.declared_len.map(|n| n.to_string()).unwrap_or_default();
    let inline = l.items.len() <= INLINE_LIST_MAX && l.items.iter().all(FoamValue::is_scalar);
    if inline {
        let body: Vec<String> = l.items.iter().map(|i| render_value(i, level)).collect();
        return format!("{prefix}{open}{}{close}", body.join(" "));
    }
    let ind = pad(level);
    let inner = pad(level + 1);
    let mut s = format!("{prefix}\n{ind}{open}\n");
    for it in &l.items {
        match it {
            FoamValue::Dict(d) => {
                write_block(&mut s, d, level + 1);
                s.push('\n');
            }
            _ => {
                s.push_str(&inner);
                s.push_str(&render_value(it, level + 1));
                s.push('\n');
            }
        }
    }
    s.push_str(&ind);
    s.push(close);
    s
}
