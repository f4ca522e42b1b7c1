//! Envelope generator and canonical-form oracles for the wire protocol.

use proptest::prelude::*;
use serde_json::{json, Map, Value};

pub const KEY_ORDER: [&str; 7] = ["op", "id", "level", "topic", "type", "throttle_ms", "msg"];

pub fn json_leaf() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(|i| json!(i)),
        (-1e6f64..1e6).prop_map(|x| json!(x)),
        (-1e-5f64..1e-5).prop_map(|x| json!(x)),
        "[a-zA-Z0-9 \"\\\\/\u{e9}\u{1F600}]{0,8}".prop_map(Value::String),
    ]
}

pub fn json_value() -> impl Strategy<Value = Value> {
    json_leaf().prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
            prop::collection::btree_map("[a-z_]{1,6}", inner, 0..4).prop_map(|m| Value::Object(m.into_iter().collect::<Map<_, _>>())),
        ]
    })
}

prop_compose! {
    pub fn envelope()(
        op in prop::sample::select(vec!["subscribe", "unsubscribe", "publish", "topics", "status"]),
        id in prop::option::of("[a-z0-9\"]{1,6}"),
        level in prop::option::of(prop::sample::select(vec!["info", "warning", "error"])),
        topic in prop::option::of("/[a-z_/]{1,10}"),
        schema in prop::option::of("clearbot/[A-Za-z]{1,8}"),
        throttle in prop::option::of(0u64..100_000),
        msg in prop::option::of(json_value()),
        order in Just(()).prop_perturb(|_, mut r| { let mut k: Vec<usize> = (0..7).collect(); for i in (1..7).rev() { k.swap(i, r.random_range(0..=i)); } k }),
    ) -> (Vec<(&'static str, Value)>, Vec<usize>) {
        let mut fields: Vec<(&'static str, Value)> = vec![("op", json!(op))];
        if let Some(id) = id { fields.push(("id", json!(id))); }
        if let Some(l) = level { fields.push(("level", json!(l))); }
        let needs_topic = matches!(op, "subscribe" | "unsubscribe" | "publish");
        match (topic, needs_topic) {
            (Some(t), _) => fields.push(("topic", json!(t))),
            (None, true) => fields.push(("topic", json!("/scan"))),
            _ => {}
        }
        if let Some(s) = schema { fields.push(("type", json!(s))); }
        if op == "subscribe" { if let Some(t) = throttle { fields.push(("throttle_ms", json!(t))); } }
        match (msg, op == "publish") {
            (Some(m), _) => fields.push(("msg", m)),
            (None, true) => fields.push(("msg", json!({}))),
            _ => {}
        }
        (fields, order)
    }
}

/// Oracle rounding, applied to a parsed tree.
pub fn oracle_round(v: &Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap();
            if x.abs() >= 1e15 {
                return v.clone();
            }
            let r = (x * 1e6).round() / 1e6;
            json!(if r == 0.0 { 0.0 } else { r })
        }
        Value::Array(a) => Value::Array(a.iter().map(oracle_round).collect()),
        Value::Object(o) => Value::Object(o.iter().map(|(k, v)| (k.clone(), oracle_round(v))).collect()),
        _ => v.clone(),
    }
}

pub fn key_positions(text: &str) -> Vec<&'static str> {
    // top-level keys in textual order, found by a depth-tracking scan
    let v: Value = serde_json::from_str(text).unwrap();
    let mut keys: Vec<(usize, &'static str)> = Vec::new();
    let (mut depth, mut in_str, mut esc) = (0i32, false, false);
    let bytes = text.as_bytes();
    for (i, &c) in bytes.iter().enumerate() {
        if in_str {
            match (esc, c) {
                (true, _) => esc = false,
                (false, b'\\') => esc = true,
                (false, b'"') => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            b'{' | b'[' => depth += 1,
            b'}' | b']' => depth -= 1,
            b'"' => {
                in_str = true;
                if depth == 1 {
                    for k in KEY_ORDER {
                        if text[i..].starts_with(&format!("\"{k}\":")) && v.get(k).is_some() && !keys.iter().any(|(_, x)| *x == k) {
                            keys.push((i, k));
                        }
                    }
                }
            }
            _ => {}
        }
    }
    keys.sort();
    keys.into_iter().map(|(_, k)| k).collect()
}


/// Text of an envelope with its fields in the given order.
pub fn shuffled_text(fields: &[(&'static str, Value)], order: &[usize]) -> String {
    let parts: Vec<String> = order.iter().filter_map(|&i| fields.get(i)).map(|(k, v)| format!("{}:{}", json!(k), v)).collect();
    format!("{{{}}}", parts.join(","))
}

/// Canonical form of an envelope's fields: numbers rounded, as a JSON object.
pub fn canonical_fields(fields: &[(&'static str, Value)]) -> Value {
    Value::Object(fields.iter().map(|(k, v)| (k.to_string(), oracle_round(v))).collect::<Map<_, _>>())
}

/// Keys of `fields` in the fixed wire order.
pub fn expected_order(fields: &[(&'static str, Value)]) -> Vec<&'static str> {
    KEY_ORDER.iter().copied().filter(|k| fields.iter().any(|(f, _)| f == k)).collect()
}
