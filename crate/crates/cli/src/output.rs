//! Flat records and their CSV / JSON renderings.

use std::io::Write;

use serde_json::{Map, Number, Value as Json};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
    Missing,
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}
impl From<Option<f64>> for Value {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Value::Missing, Value::Float)
    }
}
impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}
impl From<u32> for Value {
    fn from(v: u32) -> Self {
        Value::Int(v as i64)
    }
}
impl From<i8> for Value {
    fn from(v: i8) -> Self {
        Value::Int(v as i64)
    }
}
impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v as i64)
    }
}
impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}
impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl Value {
    fn to_json(&self) -> Json {
        match self {
            Value::Int(i) => Json::from(*i),
            Value::Float(x) => Number::from_f64(*x).map_or(Json::Null, Json::Number),
            Value::Text(s) => Json::String(s.clone()),
            Value::Bool(b) => Json::Bool(*b),
            Value::Missing => Json::Null,
        }
    }

    /// CSV cell; numbers use the same shortest round-trip digits as JSON.
    fn to_cell(&self) -> String {
        match self {
            Value::Float(x) if !x.is_finite() => {
                if x.is_nan() {
                    "nan".into()
                } else if *x > 0.0 {
                    "inf".into()
                } else {
                    "-inf".into()
                }
            }
            Value::Text(s) => s.clone(),
            Value::Missing => String::new(),
            other => other.to_json().to_string(),
        }
    }
}

/// Ordered key/value row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Record(pub Vec<(String, Value)>);

impl Record {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.0.push((key.to_string(), value.into()));
        self
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.push(key, value);
        self
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn keys(&self) -> Vec<&str> {
        self.0.iter().map(|(k, _)| k.as_str()).collect()
    }

    fn to_json(&self) -> Json {
        let mut m = Map::new();
        for (k, v) in &self.0 {
            m.insert(k.clone(), v.to_json());
        }
        Json::Object(m)
    }
}

fn io(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

/// Header from the first row; every row must carry the same keys.
pub fn write_csv<W: Write>(out: W, rows: &[Record]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    if let Some(first) = rows.first() {
        let keys = first.keys();
        w.write_record(&keys).map_err(io)?;
        for row in rows {
            if row.keys() != keys {
                return Err(CliError::Io("rows of one table carry different columns".into()));
            }
            w.write_record(row.0.iter().map(|(_, v)| v.to_cell())).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// One object for a single row, an array otherwise.
pub fn write_json<W: Write>(mut out: W, rows: &[Record], as_array: bool) -> Result<(), CliError> {
    let doc = if as_array || rows.len() != 1 {
        Json::Array(rows.iter().map(Record::to_json).collect())
    } else {
        rows[0].to_json()
    };
    serde_json::to_writer_pretty(&mut out, &doc).map_err(io)?;
    out.write_all(b"\n").map_err(io)
}
