//! Deterministic report documents.
//!
//! Floats are rounded to 12 significant digits and object keys are sorted,
//! so identical inputs give byte-identical output.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};
use crate::rational::round12;

pub const TOOL: &str = "bk";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Hex digest of the input files, filled in by the caller.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_digest: Option<String>,
    pub sections: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
}

impl ReportDocument {
    pub fn new(command: &str) -> ReportDocument {
        ReportDocument {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            input_digest: None,
            sections: BTreeMap::new(),
            warnings: vec![],
        }
    }

    pub fn with_digest(mut self, digest: String) -> ReportDocument {
        self.input_digest = Some(digest);
        self
    }

    /// Adds a section; every non-definitive verdict inside it gets a depth warning.
    pub fn section(&mut self, name: &str, value: impl Serialize) -> Result<()> {
        let mut v = serde_json::to_value(value).map_err(|e| Error::Argument(format!("cannot serialize {name}: {e}")))?;
        normalize(&mut v);
        depth_warnings(name, &v, &mut self.warnings);
        self.sections.insert(name.into(), v);
        Ok(())
    }

    pub fn warn(&mut self, w: impl Into<String>) {
        let w = w.into();
        if !self.warnings.contains(&w) {
            self.warnings.push(w);
        }
    }

    pub fn to_json(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("report is serializable");
        normalize(&mut v);
        v
    }

    pub fn to_string_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("report is serializable");
        s.push('\n');
        s
    }
}

/// Rounds floats to 12 significant digits and sorts object keys.
pub fn normalize(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap();
            *v = Number::from_f64(round12(x)).map(Value::Number).unwrap_or(Value::Null);
        }
        Value::Array(a) => a.iter_mut().for_each(normalize),
        Value::Object(o) => {
            let mut items: Vec<(String, Value)> = std::mem::take(o).into_iter().collect();
            items.sort_by(|a, b| a.0.cmp(&b.0));
            let mut m = Map::new();
            for (k, mut x) in items {
                normalize(&mut x);
                m.insert(k, x);
            }
            *o = m;
        }
        _ => {}
    }
}

fn depth_warnings(path: &str, v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(o) => {
            if let Some(s) = o.get("status").and_then(Value::as_str) {
                if s == "evidence" || s == "inconclusive" {
                    let depth = o.get("depth").and_then(Value::as_u64).unwrap_or(0);
                    let w = format!("{path}: {s} verdict limited to depth {depth}");
                    if !out.contains(&w) {
                        out.push(w);
                    }
                }
            }
            for (k, x) in o {
                depth_warnings(&format!("{path}.{k}"), x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                depth_warnings(&format!("{path}[{i}]"), x, out);
            }
        }
        _ => {}
    }
}

/// CSV with a header row; fields containing commas or quotes are quoted.
pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let field = |s: &str| {
        if s.contains([',', '"', '\n']) {
            format!("\"{}\"", s.replace('"', "\"\""))
        } else {
            s.to_string()
        }
    };
    let mut out = header.iter().map(|h| field(h)).collect::<Vec<_>>().join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.iter().map(|x| field(x)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

/// Machine-readable error record.
pub fn error_json(e: &Error) -> Value {
    serde_json::json!({ "error": e.kind(), "message": e.to_string(), "numeric": e.is_numeric() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verdict::{Direction, Verdict};

    #[test]
    fn floats_are_rounded_and_keys_sorted() {
        let mut r = ReportDocument::new("test");
        r.section("x", serde_json::json!({ "b": 1.0 / 3.0, "a": [2.0 / 3.0] })).unwrap();
        let s = r.to_string_pretty();
        assert!(s.contains("0.333333333333"));
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        assert_eq!(s, r.clone().to_string_pretty());
    }

    #[test]
    fn non_definitive_verdicts_warn() {
        let mut r = ReportDocument::new("test");
        r.section("ue", Verdict::evidence("c", Direction::For, "m", vec![1.0]).with_depth(8)).unwrap();
        r.section("det", Verdict::proved("c", "m")).unwrap();
        assert_eq!(r.warnings, vec!["ue: evidence verdict limited to depth 8".to_string()]);
    }

    #[test]
    fn csv_quotes() {
        assert_eq!(csv(&["n", "w"], &[vec!["1".into(), "a,b".into()]]), "n,w\n1,\"a,b\"\n");
    }
}
