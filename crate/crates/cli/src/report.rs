use std::io::{self, Write};

use serde::Serialize;
use serde_json::{Map, Value};

/// Ordered report records, printed as text lines or as JSON lines.
///
/// JSON objects use sorted keys, so identical requests give identical bytes.
#[derive(Debug, Default)]
pub struct Report {
    records: Vec<(String, Value)>,
}

impl Report {
    /// Adds a record tagged `kind`; `value` must serialize to an object.
    pub fn push(&mut self, kind: &str, text: impl Into<String>, value: impl Serialize) {
        let mut object = match serde_json::to_value(value).expect("report values serialize") {
            Value::Object(m) => m,
            other => {
                let mut m = Map::new();
                m.insert("value".into(), other);
                m
            }
        };
        object.insert("record".into(), Value::String(kind.into()));
        self.records.push((text.into(), Value::Object(object)));
    }

    /// Text-only line, omitted from JSON output.
    pub fn note(&mut self, text: impl Into<String>) {
        self.records.push((text.into(), Value::Null));
    }

    pub fn emit(&self, json: bool, out: &mut impl Write) -> io::Result<()> {
        for (text, value) in &self.records {
            if json {
                if !value.is_null() {
                    writeln!(out, "{value}")?;
                }
            } else if !text.is_empty() {
                writeln!(out, "{text}")?;
            }
        }
        Ok(())
    }
}
