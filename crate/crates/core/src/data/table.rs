use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column layout of a CTR table: one categorical column per field plus a
/// binary label column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSchema {
    pub fields: Vec<String>,
    pub label: String,
}

impl DatasetSchema {
    pub fn new(fields: Vec<String>, label: impl Into<String>) -> Result<Self> {
        let schema = Self {
            fields,
            label: label.into(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fields.is_empty() {
            return Err(Error::Config("schema needs at least one field".into()));
        }
        let mut seen = HashSet::new();
        for f in &self.fields {
            if !seen.insert(f.as_str()) {
                return Err(Error::Config(format!("duplicate field `{f}` in schema")));
            }
        }
        if seen.contains(self.label.as_str()) {
            return Err(Error::Config(format!("label column `{}` is also a field", self.label)));
        }
        Ok(())
    }

    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }
}

/// Parsed rows of raw tokens with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub schema: DatasetSchema,
    /// `rows[i][j]` is the token of field `j` in row `i`.
    pub rows: Vec<Vec<String>>,
    pub labels: Vec<u8>,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn label_mean(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.labels.iter().map(|&l| l as f64).sum::<f64>() / self.labels.len() as f64
    }
}

fn parse_label(raw: &str) -> Option<u8> {
    match raw.trim() {
        "0" => Some(0),
        "1" => Some(1),
        _ => None,
    }
}

/// Reads a comma-separated table with a header row.
///
/// Columns are matched by name; columns not named in the schema are ignored.
/// Line numbers in errors are 1-based and count the header.
pub fn load_table(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<RawTable> {
    let path = path.as_ref();
    schema.validate()?;
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_table(file, path, schema)
}

pub(crate) fn read_table<R: std::io::Read>(reader: R, path: &Path, schema: &DatasetSchema) -> Result<RawTable> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| parse_err(1, format!("missing column `{name}`")))
    };
    let field_cols = schema.fields.iter().map(|f| column(f)).collect::<Result<Vec<_>>>()?;
    let label_col = column(&schema.label)?;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != header.len() {
            return Err(parse_err(
                line,
                format!("expected {} columns, found {}", header.len(), record.len()),
            ));
        }
        let label = parse_label(&record[label_col])
            .ok_or_else(|| parse_err(line, format!("label `{}` is not 0 or 1", &record[label_col])))?;
        rows.push(field_cols.iter().map(|&c| record[c].trim().to_string()).collect());
        labels.push(label);
    }
    Ok(RawTable {
        schema: schema.clone(),
        rows,
        labels,
    })
}

/// Writes a table in the same format [`load_table`] reads.
pub fn write_table(path: impl AsRef<Path>, table: &RawTable) -> Result<()> {
    let path = path.as_ref();
    let io = |e: csv::Error| Error::io(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header: Vec<&str> = table.schema.fields.iter().map(String::as_str).collect();
    header.push(&table.schema.label);
    w.write_record(&header).map_err(io)?;
    for (row, &label) in table.rows.iter().zip(&table.labels) {
        let label = if label == 1 { "1" } else { "0" };
        w.write_record(row.iter().map(String::as_str).chain(std::iter::once(label)))
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
