//! The JSON envelope spoken over the socket.
//!
//! Every frame is one object with an `op` of `subscribe`, `unsubscribe`,
//! `publish`, `topics` or `status`. Encoded frames use a fixed key order
//! (`op`, `id`, `level`, `topic`, `type`, `throttle_ms`, `msg`), omit absent
//! fields, and round every non-integer number to 6 decimal places.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{Number, Value};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Subscribe,
    Unsubscribe,
    Publish,
    Topics,
    Status,
}

impl Op {
    pub fn as_str(self) -> &'static str {
        match self {
            Op::Subscribe => "subscribe",
            Op::Unsubscribe => "unsubscribe",
            Op::Publish => "publish",
            Op::Topics => "topics",
            Op::Status => "status",
        }
    }

    fn parse(s: &str) -> Option<Op> {
        Some(match s {
            "subscribe" => Op::Subscribe,
            "unsubscribe" => Op::Unsubscribe,
            "publish" => Op::Publish,
            "topics" => Op::Topics,
            "status" => Op::Status,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Info,
    Warning,
    Error,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Info => "info",
            Level::Warning => "warning",
            Level::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireMessage {
    pub op: Op,
    pub id: Option<String>,
    pub level: Option<Level>,
    pub topic: Option<String>,
    pub schema: Option<String>,
    pub throttle_ms: Option<u64>,
    pub msg: Option<Value>,
}

impl WireMessage {
    pub fn new(op: Op) -> Self {
        Self {
            op,
            id: None,
            level: None,
            topic: None,
            schema: None,
            throttle_ms: None,
            msg: None,
        }
    }

    pub fn subscribe(topic: &str, throttle_ms: Option<u64>) -> Self {
        Self {
            topic: Some(topic.into()),
            throttle_ms,
            ..Self::new(Op::Subscribe)
        }
    }

    pub fn publish(topic: &str, schema: &str, msg: Value) -> Self {
        Self {
            topic: Some(topic.into()),
            schema: Some(schema.into()),
            msg: Some(msg),
            ..Self::new(Op::Publish)
        }
    }

    /// A status reply carrying a human-readable text.
    pub fn status(level: Level, text: impl Into<String>, id: Option<String>) -> Self {
        Self {
            id,
            level: Some(level),
            msg: Some(Value::String(text.into())),
            ..Self::new(Op::Status)
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeErrorKind {
    #[error("malformed JSON: {0}")]
    BadJson(String),
    #[error("unknown op {0:?}")]
    UnknownOp(String),
    #[error("missing field {0:?}")]
    MissingField(&'static str),
    #[error("field {0:?} has the wrong type")]
    BadField(&'static str),
}

/// A rejected frame, with the client's correlation id when one was readable.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{kind}")]
pub struct DecodeError {
    pub kind: DecodeErrorKind,
    pub id: Option<String>,
}

impl DecodeError {
    /// The status reply that answers this error.
    pub fn reply(&self) -> WireMessage {
        WireMessage::status(Level::Error, self.kind.to_string(), self.id.clone())
    }
}

fn opt_str(obj: &serde_json::Map<String, Value>, key: &'static str) -> Result<Option<String>, DecodeErrorKind> {
    match obj.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(DecodeErrorKind::BadField(key)),
    }
}

/// Parses and validates one inbound text frame. Unknown keys are ignored.
pub fn decode_frame(text: &str) -> Result<WireMessage, DecodeError> {
    let v: Value = serde_json::from_str(text).map_err(|e| DecodeError {
        kind: DecodeErrorKind::BadJson(e.to_string()),
        id: None,
    })?;
    let Value::Object(obj) = v else {
        return Err(DecodeError {
            kind: DecodeErrorKind::BadJson("frame is not an object".into()),
            id: None,
        });
    };
    let id = match obj.get("id") {
        Some(Value::String(s)) => Some(s.clone()),
        _ => None,
    };
    let fail = |kind| DecodeError { kind, id: id.clone() };
    if obj.get("id").is_some_and(|v| !v.is_string()) {
        return Err(fail(DecodeErrorKind::BadField("id")));
    }
    let op = match obj.get("op") {
        None => return Err(fail(DecodeErrorKind::MissingField("op"))),
        Some(Value::String(s)) => Op::parse(s).ok_or_else(|| fail(DecodeErrorKind::UnknownOp(s.clone())))?,
        Some(other) => return Err(fail(DecodeErrorKind::UnknownOp(other.to_string()))),
    };
    let topic = opt_str(&obj, "topic").map_err(fail)?;
    let schema = opt_str(&obj, "type").map_err(fail)?;
    let level = match obj.get("level") {
        None => None,
        Some(v) => Some(serde_json::from_value(v.clone()).map_err(|_| fail(DecodeErrorKind::BadField("level")))?),
    };
    let throttle_ms = match obj.get("throttle_ms") {
        None => None,
        Some(v) if op == Op::Subscribe => Some(v.as_u64().ok_or_else(|| fail(DecodeErrorKind::BadField("throttle_ms")))?),
        Some(_) => return Err(fail(DecodeErrorKind::BadField("throttle_ms"))),
    };
    let msg = obj.get("msg").cloned();
    match op {
        Op::Subscribe | Op::Unsubscribe if topic.is_none() => return Err(fail(DecodeErrorKind::MissingField("topic"))),
        Op::Publish if topic.is_none() => return Err(fail(DecodeErrorKind::MissingField("topic"))),
        Op::Publish if msg.is_none() => return Err(fail(DecodeErrorKind::MissingField("msg"))),
        _ => {}
    }
    Ok(WireMessage {
        op,
        id,
        level,
        topic,
        schema,
        throttle_ms,
        msg,
    })
}

const ROUND_LIMIT: f64 = 1e15;

/// Rounds every non-integer number in place to 6 decimal places.
pub fn round_numbers(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(0.0);
            if x.abs() < ROUND_LIMIT {
                let r = (x * 1e6).round() / 1e6;
                // no negative zero on the wire
                let r = if r == 0.0 { 0.0 } else { r };
                if let Some(n2) = Number::from_f64(r) {
                    *n = n2;
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_numbers),
        Value::Object(o) => o.values_mut().for_each(round_numbers),
        _ => {}
    }
}

/// Canonical JSON text of a payload: rounded numbers, sorted object keys.
pub fn canonical_json(v: &Value) -> String {
    let mut v = v.clone();
    round_numbers(&mut v);
    v.to_string()
}

fn push_field(out: &mut String, key: &str, raw: &str) {
    let _ = write!(out, ",\"{key}\":{raw}");
}

fn quoted(s: &str) -> String {
    Value::String(s.to_owned()).to_string()
}

/// Canonical text of an envelope.
pub fn encode_frame(m: &WireMessage) -> String {
    encode_with_msg_text(m, m.msg.as_ref().map(canonical_json).as_deref())
}

/// Envelope text with an already-canonical `msg` text spliced in.
pub(crate) fn encode_with_msg_text(m: &WireMessage, msg: Option<&str>) -> String {
    let mut out = format!("{{\"op\":\"{}\"", m.op.as_str());
    if let Some(id) = &m.id {
        push_field(&mut out, "id", &quoted(id));
    }
    if let Some(level) = m.level {
        push_field(&mut out, "level", &quoted(level.as_str()));
    }
    if let Some(t) = &m.topic {
        push_field(&mut out, "topic", &quoted(t));
    }
    if let Some(s) = &m.schema {
        push_field(&mut out, "type", &quoted(s));
    }
    if let Some(ms) = m.throttle_ms {
        push_field(&mut out, "throttle_ms", &ms.to_string());
    }
    if let Some(msg) = msg {
        push_field(&mut out, "msg", msg);
    }
    out.push('}');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn subscribe_example() {
        let m = decode_frame(r#"{"op":"subscribe","topic":"/scan"}"#).unwrap();
        assert_eq!(m, WireMessage::subscribe("/scan", None));
        assert_eq!(encode_frame(&m), r#"{"op":"subscribe","topic":"/scan"}"#);
    }

    #[test]
    fn unknown_op() {
        let e = decode_frame(r#"{"op":"nope","id":"7"}"#).unwrap_err();
        assert_eq!(e.kind, DecodeErrorKind::UnknownOp("nope".into()));
        assert_eq!(
            encode_frame(&e.reply()),
            r#"{"op":"status","id":"7","level":"error","msg":"unknown op \"nope\""}"#
        );
    }

    #[test]
    fn malformed_inputs() {
        let kind = |t: &str| decode_frame(t).unwrap_err().kind;
        assert!(matches!(kind("{"), DecodeErrorKind::BadJson(_)));
        assert!(matches!(kind("[1,2]"), DecodeErrorKind::BadJson(_)));
        assert_eq!(kind(r#"{"topic":"/scan"}"#), DecodeErrorKind::MissingField("op"));
        assert_eq!(kind(r#"{"op":"subscribe"}"#), DecodeErrorKind::MissingField("topic"));
        assert_eq!(kind(r#"{"op":"publish","topic":"/goal"}"#), DecodeErrorKind::MissingField("msg"));
        assert_eq!(kind(r#"{"op":"subscribe","topic":"/a","throttle_ms":-1}"#), DecodeErrorKind::BadField("throttle_ms"));
        assert_eq!(kind(r#"{"op":"publish","topic":"/a","msg":{},"throttle_ms":5}"#), DecodeErrorKind::BadField("throttle_ms"));
        assert_eq!(kind(r#"{"op":"topics","id":3}"#), DecodeErrorKind::BadField("id"));
        assert_eq!(kind(r#"{"op":7}"#), DecodeErrorKind::UnknownOp("7".into()));
        assert_eq!(decode_frame(r#"{"op":"x","id":"q"}"#).unwrap_err().id.as_deref(), Some("q"));
    }

    #[test]
    fn rounding() {
        let mut v = json!({"a": 0.1234567, "b": [1, -0.0000001, 2.5], "c": 1e300, "d": 7});
        round_numbers(&mut v);
        assert_eq!(v.to_string(), r#"{"a":0.123457,"b":[1,0.0,2.5],"c":1e+300,"d":7}"#);
        let again = {
            let mut w = v.clone();
            round_numbers(&mut w);
            w
        };
        assert_eq!(v, again);
    }

    #[test]
    fn key_order_is_fixed() {
        let m = decode_frame(r#"{"msg":{"y":2,"x":1.00000049},"type":"clearbot/Goal","topic":"/goal","id":"a","op":"publish"}"#).unwrap();
        assert_eq!(
            encode_frame(&m),
            r#"{"op":"publish","id":"a","topic":"/goal","type":"clearbot/Goal","msg":{"x":1.0,"y":2}}"#
        );
    }
}
