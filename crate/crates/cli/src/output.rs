//! Rendering of reports as CSV (with a one-line JSON header) or JSON.

use serde_json::{json, Map, Value};

use crate::args::Format;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Table { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// What a command produced. `result` is the full JSON report; `table`, when
/// present, is the CSV body and `meta` the summary placed in the CSV header.
pub struct Report {
    pub summary: String,
    pub result: Value,
    pub table: Option<Table>,
    pub meta: Value,
    pub default_format: Format,
}

impl Report {
    pub fn json(summary: String, result: Value) -> Self {
        Report { summary, result, table: None, meta: Value::Null, default_format: Format::Json }
    }

    pub fn table(summary: String, result: Value, meta: Value, table: Table) -> Self {
        Report { summary, result, table: Some(table), meta, default_format: Format::Csv }
    }
}

fn header(command: &str, config: &Value) -> Map<String, Value> {
    let mut h = Map::new();
    h.insert("schema_version".into(), json!(SCHEMA_VERSION));
    h.insert("command".into(), json!(command));
    h.insert("config".into(), config.clone());
    h
}

pub fn render(command: &str, config: &Value, report: &Report, format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Json => {
            let mut doc = header(command, config);
            doc.insert("result".into(), report.result.clone());
            let mut out = serde_json::to_vec_pretty(&Value::Object(doc)).map_err(|e| CliError::Invalid(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let mut doc = header(command, config);
            let fallback;
            let table = match &report.table {
                Some(t) => {
                    doc.insert("meta".into(), report.meta.clone());
                    t
                }
                None => {
                    fallback = key_value_table(&report.result);
                    &fallback
                }
            };
            let mut out = format!("# {}\n", Value::Object(doc)).into_bytes();
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&table.columns).map_err(csv_err)?;
            for row in &table.rows {
                w.write_record(row).map_err(csv_err)?;
            }
            out.extend(w.into_inner().map_err(|e| CliError::Invalid(e.to_string()))?);
            Ok(out)
        }
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Invalid(e.to_string())
}

/// Top-level fields of a JSON object as `key,value` rows.
fn key_value_table(result: &Value) -> Table {
    let mut t = Table::new(vec!["key", "value"]);
    match result {
        Value::Object(map) => {
            for (k, v) in map {
                let v = match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                t.push(vec![k.clone(), v]);
            }
        }
        other => t.push(vec!["value".into(), other.to_string()]),
    }
    t
}
