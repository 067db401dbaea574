use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Categorical,
    Integer,
    Boolean,
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnType::Categorical => "categorical",
            ColumnType::Integer => "integer",
            ColumnType::Boolean => "boolean",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    #[serde(rename = "type")]
    pub kind: ColumnType,
    #[serde(default)]
    pub is_phi: bool,
    /// Marks the entity-identifier column that `DISTINCT` counts over.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub is_identifier: bool,
}

/// Column name → type and PHI flag. Serialized as a plain JSON object.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schema {
    pub columns: BTreeMap<String, ColumnSpec>,
}

impl Schema {
    pub fn from_json(text: &str) -> Result<Schema, IngestError> {
        let schema: Schema =
            serde_json::from_str(text).map_err(|e| IngestError::Schema(e.to_string()))?;
        if schema.columns.is_empty() {
            return Err(IngestError::Schema("schema declares no columns".into()));
        }
        if schema.columns.values().filter(|c| c.is_identifier).count() > 1 {
            return Err(IngestError::Schema("at most one column may be the identifier".into()));
        }
        Ok(schema)
    }

    pub fn get(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.get(name)
    }

    pub fn identifier(&self) -> Option<&str> {
        self.columns
            .iter()
            .find(|(_, c)| c.is_identifier)
            .map(|(name, _)| name.as_str())
    }
}

/// A single typed cell. Comparisons are only meaningful within one type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Text(String),
}

impl Value {
    pub fn kind(&self) -> ColumnType {
        match self {
            Value::Bool(_) => ColumnType::Boolean,
            Value::Int(_) => ColumnType::Integer,
            Value::Text(_) => ColumnType::Categorical,
        }
    }

    pub fn parse(raw: &str, kind: ColumnType) -> Option<Value> {
        let raw = raw.trim();
        match kind {
            ColumnType::Categorical => Some(Value::Text(raw.to_owned())),
            ColumnType::Integer => raw.parse().ok().map(Value::Int),
            ColumnType::Boolean => match raw.to_ascii_lowercase().as_str() {
                "true" => Some(Value::Bool(true)),
                "false" => Some(Value::Bool(false)),
                _ => None,
            },
        }
    }

    pub fn compare(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => Some(a.cmp(b)),
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            (Value::Text(a), Value::Text(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

/// Rows and rows-only errors carry a 1-based data row number (header excluded).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("input is empty or has no data rows")]
    Empty,
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("column `{column}` is not declared in the schema")]
    UnknownColumn { column: String },
    #[error("schema column `{column}` is missing from the header")]
    MissingColumn { column: String },
    #[error("column `{column}` appears twice in the header")]
    DuplicateColumn { column: String },
    #[error("row {row}, column `{column}`: expected {expected}, found {value:?}")]
    TypeMismatch {
        row: usize,
        column: String,
        expected: ColumnType,
        value: String,
    },
    #[error("row {row}: expected {expected} fields, found {found}")]
    FieldCount {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("malformed CSV: {0}")]
    Csv(String),
}

/// An immutable ingested table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    source: String,
    schema: Schema,
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
}

impl Dataset {
    /// Build from already-typed rows; every row must match `columns` and the schema.
    pub fn from_rows(
        source: impl Into<String>,
        schema: Schema,
        columns: Vec<String>,
        rows: Vec<Vec<Value>>,
    ) -> Result<Dataset, IngestError> {
        check_header(&schema, &columns)?;
        if rows.is_empty() {
            return Err(IngestError::Empty);
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(IngestError::FieldCount {
                    row: i + 1,
                    expected: columns.len(),
                    found: row.len(),
                });
            }
            for (col, value) in columns.iter().zip(row) {
                let expected = schema.columns[col].kind;
                if value.kind() != expected {
                    return Err(IngestError::TypeMismatch {
                        row: i + 1,
                        column: col.clone(),
                        expected,
                        value: value.to_string(),
                    });
                }
            }
        }
        Ok(Dataset {
            source: source.into(),
            schema,
            columns,
            rows,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    /// Record count n.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

fn check_header(schema: &Schema, columns: &[String]) -> Result<(), IngestError> {
    for (i, col) in columns.iter().enumerate() {
        if !schema.columns.contains_key(col) {
            return Err(IngestError::UnknownColumn { column: col.clone() });
        }
        if columns[..i].contains(col) {
            return Err(IngestError::DuplicateColumn { column: col.clone() });
        }
    }
    for name in schema.columns.keys() {
        if !columns.contains(name) {
            return Err(IngestError::MissingColumn { column: name.clone() });
        }
    }
    Ok(())
}

/// Parse comma-separated UTF-8 text with a header row against `schema`.
/// The first bad cell aborts ingestion.
pub fn ingest_csv(bytes: &[u8], schema: &Schema, source: &str) -> Result<Dataset, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes);
    let header = reader
        .headers()
        .map_err(|e| IngestError::Csv(e.to_string()))?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].trim().is_empty()) {
        return Err(IngestError::Empty);
    }
    let columns: Vec<String> = header.iter().map(|h| h.trim().to_owned()).collect();
    check_header(schema, &columns)?;
    let kinds: Vec<ColumnType> = columns.iter().map(|c| schema.columns[c].kind).collect();

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = record.map_err(|e| IngestError::Csv(format!("row {row_no}: {e}")))?;
        if record.len() != columns.len() {
            return Err(IngestError::FieldCount {
                row: row_no,
                expected: columns.len(),
                found: record.len(),
            });
        }
        let row = record
            .iter()
            .zip(columns.iter().zip(&kinds))
            .map(|(raw, (col, &kind))| {
                Value::parse(raw, kind).ok_or_else(|| IngestError::TypeMismatch {
                    row: row_no,
                    column: col.clone(),
                    expected: kind,
                    value: raw.to_owned(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Dataset::from_rows(source, schema.clone(), columns, rows)
}
