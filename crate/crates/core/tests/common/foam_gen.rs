//! Proptest strategies for generated dictionary trees.

use flamepilot::foamdict::{looks_numeric, FoamDict, FoamEntry, FoamFile, FoamList, FoamValue};
use proptest::prelude::*;

pub fn keyword() -> impl Strategy<Value = String> {
    "[a-z][a-zA-Z0-9_]{0,8}".prop_filter("reserved", |k| k != "FoamFile")
}

pub fn word() -> impl Strategy<Value = FoamValue> {
    "[a-zA-Z_][a-zA-Z0-9_.]{0,6}"
        .prop_filter("numeric-looking", |w| !looks_numeric(w))
        .prop_map(FoamValue::Token)
}

pub fn number() -> impl Strategy<Value = FoamValue> {
    prop_oneof![
        (-1000i64..1000).prop_map(|i| FoamValue::Number(i as f64)),
        any::<f64>().prop_filter("finite", |x| x.is_finite()).prop_map(FoamValue::Number),
    ]
}

pub fn scalar() -> impl Strategy<Value = FoamValue> {
    prop_oneof![
        word(),
        number(),
        "[a-zA-Z0-9 ./]{0,10}".prop_map(FoamValue::Str),
    ]
}

/// An integer directly followed by a parenthesised list reads back as a
/// length prefix, so generated sequences never contain that pair.
pub fn no_prefix_ambiguity(items: &[FoamValue]) -> bool {
    items.windows(2).all(|w| {
        !matches!(
            (&w[0], &w[1]),
            (FoamValue::Number(n), FoamValue::List(l))
                if n.fract() == 0.0 && l.declared_len.is_none()
        )
    })
}

pub fn value() -> impl Strategy<Value = FoamValue> {
    let leaf = scalar();
    leaf.prop_recursive(4, 48, 6, |inner| {
        prop_oneof![
            (prop::collection::vec(inner.clone(), 0..10), any::<bool>())
                .prop_filter("prefix ambiguity", |(items, _)| no_prefix_ambiguity(items))
                .prop_map(|(items, prefixed)| {
                    if prefixed {
                        FoamValue::List(FoamList::with_len_prefix(items))
                    } else {
                        FoamValue::List(FoamList::new(items))
                    }
                }),
            prop::collection::vec(scalar(), 0..5)
                .prop_map(|items| FoamValue::List(FoamList::bracket(items))),
            dict(inner).prop_map(FoamValue::Dict),
        ]
    })
}

pub fn entry_value() -> impl Strategy<Value = FoamValue> {
    prop_oneof![
        3 => value(),
        1 => prop::collection::vec(value(), 2..5)
            .prop_filter("seq shape", |items| {
                !matches!(items[0], FoamValue::Dict(_)) && no_prefix_ambiguity(items)
            })
            .prop_map(FoamValue::Seq),
        1 => Just(FoamValue::Seq(vec![])),
    ]
}

pub fn dict(inner: impl Strategy<Value = FoamValue> + Clone) -> impl Strategy<Value = FoamDict> {
    let entry = (
        keyword(),
        inner,
        prop::collection::vec("// [a-z]{1,4}( [a-z]{1,4}){0,2}", 0..2),
    )
        .prop_map(|(k, v, trivia)| FoamEntry {
            trivia,
            ..FoamEntry::new(k, v)
        });
    prop::collection::vec(entry, 0..5).prop_map(|entries| FoamDict {
        entries,
        trailer: vec![],
    })
}

pub fn file() -> impl Strategy<Value = FoamFile> {
    let entry = (keyword(), entry_value(), prop::collection::vec("// [a-z]{1,4}( [a-z]{1,4}){0,2}", 0..2))
        .prop_map(|(k, v, trivia)| FoamEntry {
            trivia,
            ..FoamEntry::new(k, v)
        });
    (prop::collection::vec(entry, 0..8), any::<bool>()).prop_map(|(entries, with_header)| {
        let mut f = FoamFile::new();
        if with_header {
            let mut h = FoamDict::new();
            h.push("format", FoamValue::token("ascii"));
            h.push("object", FoamValue::token("generated"));
            f.header = Some(FoamEntry::new("FoamFile", FoamValue::Dict(h)));
        }
        f.body.entries = entries;
        f
    })
}
