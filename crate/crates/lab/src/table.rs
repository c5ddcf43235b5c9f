//! Tabular output in CSV or JSON.

use serde_json::{Map, Value};

use crate::config::Format;
use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest round-trip decimal form; identical on every platform.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

impl Table {
    pub fn new(headers: &[&'static str]) -> Self {
        Table { headers: headers.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> LabResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| LabError::io("<csv buffer>", e.into_error()))
    }

    /// Array of objects; cells that parse as JSON numbers stay numeric.
    pub fn to_json_value(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    let mut m = Map::new();
                    for (h, c) in self.headers.iter().zip(r) {
                        let v = match c.parse::<f64>() {
                            Ok(x) if x.is_finite() && !c.is_empty() => serde_json::from_str(c).unwrap_or(Value::String(c.clone())),
                            _ if c.is_empty() => Value::Null,
                            _ => Value::String(c.clone()),
                        };
                        m.insert((*h).to_string(), v);
                    }
                    Value::Object(m)
                })
                .collect(),
        )
    }

    pub fn render(&self, format: Format) -> LabResult<Vec<u8>> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => {
                let mut out = serde_json::to_vec_pretty(&self.to_json_value())?;
                out.push(b'\n');
                Ok(out)
            }
        }
    }
}
