//! Canonical report serialization: object keys sorted, floats printed in
//! scientific notation with 17 significant digits, no whitespace. Identical
//! runs render byte-identical output regardless of map implementation or
//! insertion order.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;

/// One run's report: the operation name, the configuration that produced it
/// (seeds and tolerances included), and the result payload.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub op: String,
    pub config: Value,
    pub result: Value,
}

impl Report {
    pub fn new(op: impl Into<String>, config: &impl Serialize, result: &impl Serialize) -> Result<Report> {
        Ok(Report {
            op: op.into(),
            config: serde_json::to_value(config)?,
            result: serde_json::to_value(result)?,
        })
    }

    /// Canonical single-line JSON with a trailing newline.
    pub fn render(&self) -> String {
        let v = serde_json::json!({
            "op": self.op,
            "config": self.config,
            "result": self.result,
        });
        let mut out = canonical_json(&v);
        out.push('\n');
        out
    }
}

/// Renders a JSON value canonically. Note serde_json already maps non-finite
/// floats to null during value construction.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, &mut out);
    out
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            // integers stay exact; everything else gets 17 significant digits
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{}", i);
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{}", u);
            } else {
                let _ = write!(out, "{:.16e}", n.as_f64().unwrap());
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serialization"));
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            // sort explicitly: the map's own order depends on crate features
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("key serialization"));
                out.push(':');
                write_value(&map[k.as_str()], out);
            }
            out.push('}');
        }
    }
}
