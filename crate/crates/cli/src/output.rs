use std::io::Write;

use serde_json::{Map, Value};

use crate::config::OutputFormat;
use crate::error::CliError;

/// Rows with named columns, rendered in any output format.
#[derive(Debug, Clone, PartialEq)]
pub struct Rows {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Rows {
    pub fn new(headers: &[&str]) -> Self {
        Rows { headers: headers.iter().map(|h| (*h).to_owned()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn write(&self, format: OutputFormat, out: &mut dyn Write) -> Result<(), CliError> {
        match format {
            OutputFormat::Table => {
                let mut text = self.headers.join("\t");
                text.push('\n');
                for row in &self.rows {
                    text.push_str(&row.iter().map(cell).collect::<Vec<_>>().join("\t"));
                    text.push('\n');
                }
                emit(out, &text)
            }
            OutputFormat::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.headers).map_err(csv_error)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(cell)).map_err(csv_error)?;
                }
                let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
                out.write_all(&bytes).map_err(io_error)
            }
            OutputFormat::Jsonl => {
                for row in &self.rows {
                    let object: Map<String, Value> = self.headers.iter().cloned().zip(row.iter().cloned()).collect();
                    jsonl(out, &Value::Object(object))?;
                }
                Ok(())
            }
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Data(e.to_string())
}

pub fn io_error(e: std::io::Error) -> CliError {
    CliError::Data(format!("cannot write output: {e}"))
}

pub fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(io_error)
}

pub fn jsonl(out: &mut dyn Write, value: &impl serde::Serialize) -> Result<(), CliError> {
    let mut line = serde_json::to_vec(value).expect("output serializes");
    line.push(b'\n');
    out.write_all(&line).map_err(io_error)
}
