//! Deterministic report emission.
//!
//! Reports are built as ordered JSON trees and serialized by a writer that
//! keeps byte-identical output across runs: object fields stay in insertion
//! order, floats print with 17 significant digits in scientific notation
//! (round-trip exact for f64), and non-finite floats become null. The CSV
//! writer uses the same float format.

use std::fmt::Write as _;

/// JSON value with insertion-ordered objects.
#[derive(Debug, Clone, PartialEq)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    UInt(u64),
    Float(f64),
    Str(String),
    Array(Vec<Json>),
    Object(Vec<(String, Json)>),
}

impl Json {
    pub fn obj() -> Json {
        Json::Object(Vec::new())
    }

    /// Append a field; meaningful on `Object` only.
    pub fn push(&mut self, key: &str, value: Json) -> &mut Json {
        if let Json::Object(fields) = self {
            fields.push((key.to_string(), value));
        }
        self
    }

    pub fn with<V: Into<Json>>(mut self, key: &str, value: V) -> Json {
        self.push(key, value.into());
        self
    }

    /// Append every field of another object; meaningful on `Object` only.
    pub fn extend(mut self, other: Json) -> Json {
        if let (Json::Object(fields), Json::Object(extra)) = (&mut self, other) {
            fields.extend(extra);
        }
        self
    }

    pub fn floats(values: &[f64]) -> Json {
        Json::Array(values.iter().map(|&v| Json::Float(v)).collect())
    }

    pub fn strings(values: &[String]) -> Json {
        Json::Array(values.iter().map(|v| Json::Str(v.clone())).collect())
    }
}

impl From<f64> for Json {
    fn from(v: f64) -> Json {
        Json::Float(v)
    }
}
impl From<u64> for Json {
    fn from(v: u64) -> Json {
        Json::UInt(v)
    }
}
impl From<usize> for Json {
    fn from(v: usize) -> Json {
        Json::UInt(v as u64)
    }
}
impl From<bool> for Json {
    fn from(v: bool) -> Json {
        Json::Bool(v)
    }
}
impl From<&str> for Json {
    fn from(v: &str) -> Json {
        Json::Str(v.to_string())
    }
}
impl From<String> for Json {
    fn from(v: String) -> Json {
        Json::Str(v)
    }
}

/// 17 significant digits, decimal scientific notation; not finite prints null.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

fn escape_into(out: &mut String, s: &str) {
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

fn write_value(out: &mut String, v: &Json, indent: usize) {
    const STEP: usize = 2;
    match v {
        Json::Null => out.push_str("null"),
        Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Json::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Json::UInt(u) => {
            let _ = write!(out, "{u}");
        }
        Json::Float(f) => out.push_str(&format_float(*f)),
        Json::Str(s) => escape_into(out, s),
        Json::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&" ".repeat(indent + STEP));
                write_value(out, item, indent + STEP);
            }
            out.push('\n');
            out.push_str(&" ".repeat(indent));
            out.push(']');
        }
        Json::Object(fields) => {
            if fields.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            for (i, (k, val)) in fields.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&" ".repeat(indent + STEP));
                escape_into(out, k);
                out.push_str(": ");
                write_value(out, val, indent + STEP);
            }
            out.push('\n');
            out.push_str(&" ".repeat(indent));
            out.push('}');
        }
    }
}

/// Serialize with a trailing newline.
pub fn to_json_string(v: &Json) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

/// Standard report envelope: command, config echo, seed, results, warnings.
pub fn envelope(command: &str, config_echo: Json, seed: u64, results: Json, warnings: &[String]) -> Json {
    Json::obj()
        .with("command", command)
        .with("config_echo", config_echo)
        .with("seed", seed)
        .with("results", results)
        .with("warnings", Json::strings(warnings))
}

/// One CSV cell.
#[derive(Debug, Clone)]
pub enum Cell {
    Float(f64),
    Int(i64),
    UInt(u64),
    Str(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Cell {
        Cell::Float(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Cell {
        Cell::UInt(v as u64)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Cell {
        Cell::Str(v.to_string())
    }
}

/// Header plus rows; cells containing commas, quotes, or newlines are quoted.
pub fn to_csv_string(header: &[&str], rows: &[Vec<Cell>]) -> String {
    let quote = |s: &str| -> String {
        if s.contains(',') || s.contains('"') || s.contains('\n') {
            format!("\"{}\"", s.replace('"', "\"\""))
        } else {
            s.to_string()
        }
    };
    let mut out = String::new();
    out.push_str(&header.iter().map(|h| quote(h)).collect::<Vec<_>>().join(","));
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Float(f) => format_float(*f),
                Cell::Int(i) => i.to_string(),
                Cell::UInt(u) => u.to_string(),
                Cell::Str(s) => quote(s),
            })
            .collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}
