//! Tables, summaries and atomic file output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Seventeen significant digits: enough to round-trip any double.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Num(v) => fmt_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            // Non-finite values have no JSON form.
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => Value::from(*v),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Empty => Value::Null,
        }
    }
}

/// One output table; becomes `<name>.csv` or `<name>.json`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<&'static str>) -> Self {
        Table {
            name: name.into(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// CSV with a `#` metadata block above the header.
    pub fn to_csv(&self, metadata: &[(String, String)]) -> Result<Vec<u8>, csv::Error> {
        let mut buf = Vec::new();
        for (k, v) in metadata {
            writeln!(buf, "# {k}: {v}")?;
        }
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::text))?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    }

    pub fn to_json(&self, metadata: &[(String, String)]) -> Value {
        let meta: serde_json::Map<String, Value> = metadata
            .iter()
            .map(|(k, v)| (k.clone(), Value::from(v.as_str())))
            .collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
            .collect();
        serde_json::json!({ "metadata": meta, "columns": self.columns, "rows": rows })
    }
}

/// Result of running one command before it is written out.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    pub scalars: BTreeMap<String, Value>,
}

impl Report {
    pub fn scalar(&mut self, key: &str, v: impl Into<Value>) {
        self.scalars.insert(key.to_string(), v.into());
    }

    /// Float scalar; non-finite values are stored as null.
    pub fn number(&mut self, key: &str, v: f64) {
        let value = serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number);
        self.scalars.insert(key.to_string(), value);
    }
}

/// `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub scalars: BTreeMap<String, Value>,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
}

/// Writes `bytes` to `path` via a temporary file in the same directory and
/// a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Writes every table in `format`; returns the file paths in order.
pub fn write_tables(
    dir: &Path,
    report: &Report,
    metadata: &[(String, String)],
    format: Format,
) -> Result<Vec<PathBuf>, CliError> {
    let mut paths = Vec::new();
    for table in &report.tables {
        let (path, bytes) = match format {
            Format::Csv => {
                let path = dir.join(format!("{}.csv", table.name));
                let bytes = table
                    .to_csv(metadata)
                    .map_err(|e| CliError::io(&path, std::io::Error::other(e)))?;
                (path, bytes)
            }
            Format::Json => {
                let path = dir.join(format!("{}.json", table.name));
                let mut bytes = serde_json::to_vec_pretty(&table.to_json(metadata))
                    .map_err(|e| CliError::io(&path, std::io::Error::other(e)))?;
                bytes.push(b'\n');
                (path, bytes)
            }
        };
        write_atomic(&path, &bytes)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }

    #[test]
    fn csv_has_metadata_then_header() {
        let mut t = Table::new("x", vec!["a", "b"]);
        t.push(vec![Cell::Num(0.5), Cell::Text("stable".into())]);
        t.push(vec![Cell::Int(3), Cell::Empty]);
        let meta = vec![("command".to_string(), "map".to_string())];
        let text = String::from_utf8(t.to_csv(&meta).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines, ["# command: map", "a,b", "5.0000000000000000e-1,stable", "3,"]);
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
