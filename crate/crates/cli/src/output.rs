use std::io::Write;
use std::path::Path;

use peakload::format::{round_sig, sig};
use peakload::{Error, Result};
use serde_json::{Map, Value};

use crate::args::Format;

/// What a subcommand produces: a CSV table and the JSON object carrying
/// the same numbers.
pub struct Report {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub json: Value,
}

impl Report {
    /// A one-row table whose columns are the flattened keys of `json`.
    pub fn single(json: Value) -> Report {
        let mut cells = Vec::new();
        flatten("", &json, &mut cells);
        let (header, row) = cells.into_iter().unzip();
        Report {
            header,
            rows: vec![row],
            json,
        }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, child, out);
            }
        }
        other => out.push((prefix.to_string(), cell(other))),
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Number(n) if n.is_f64() => sig(n.as_f64().expect("f64")),
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Array(items) => items.iter().map(cell).collect::<Vec<_>>().join(";"),
        Value::Object(_) => unreachable!("objects are flattened"),
    }
}

/// Every float in `v` rounded to the printed significant digits.
pub fn rounded(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64");
            serde_json::Number::from_f64(round_sig(x)).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(rounded).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, rounded(v))).collect::<Map<_, _>>()),
        other => other,
    }
}

pub fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

pub fn render(report: &Report, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => {
            let mut text = serde_json::to_string_pretty(&rounded(report.json.clone()))
                .map_err(|e| Error::Parse(format!("encoding json: {e}")))?;
            text.push('\n');
            Ok(text.into_bytes())
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let err = |e: csv::Error| Error::Parse(format!("encoding csv: {e}"));
            w.write_record(&report.header).map_err(err)?;
            for row in &report.rows {
                w.write_record(row).map_err(err)?;
            }
            w.into_inner().map_err(|e| Error::Parse(format!("encoding csv: {e}")))
        }
    }
}

pub fn emit(bytes: &[u8], out: Option<&Path>) -> Result<()> {
    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
        move |source| Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(io(path)),
        None => {
            let stdout = Path::new("<stdout>");
            let mut lock = std::io::stdout().lock();
            lock.write_all(bytes).map_err(io(stdout))?;
            lock.flush().map_err(io(stdout))
        }
    }
}
