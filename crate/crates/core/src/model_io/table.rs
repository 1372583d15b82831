use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::expr::EvalError;
use crate::value::{format_real, Value};

/// Rows inspected when inferring column types.
pub const INFERENCE_ROWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnType {
    Integer,
    Real,
    Boolean,
    Text,
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnType::Integer => "integer",
            ColumnType::Real => "real",
            ColumnType::Boolean => "boolean",
            ColumnType::Text => "text",
        })
    }
}

impl ColumnType {
    fn parse(self, cell: &str) -> Option<Value> {
        match self {
            ColumnType::Integer => cell.parse().ok().map(Value::Int),
            ColumnType::Real => parse_real(cell).map(Value::Real),
            ColumnType::Boolean => match cell.to_ascii_lowercase().as_str() {
                "true" => Some(Value::Bool(true)),
                "false" => Some(Value::Bool(false)),
                _ => None,
            },
            ColumnType::Text => Some(Value::text(cell)),
        }
    }

    fn infer<'a>(cells: impl Iterator<Item = &'a str> + Clone) -> ColumnType {
        [ColumnType::Integer, ColumnType::Real, ColumnType::Boolean]
            .into_iter()
            .find(|ty| cells.clone().all(|c| ty.parse(c).is_some()))
            .unwrap_or(ColumnType::Text)
    }

    fn admits(self, v: &Value) -> bool {
        matches!(
            (self, v),
            (ColumnType::Integer, Value::Int(_))
                | (ColumnType::Real, Value::Real(_))
                | (ColumnType::Boolean, Value::Bool(_))
                | (ColumnType::Text, Value::Text(_))
        )
    }
}

fn parse_real(cell: &str) -> Option<f64> {
    // Rust also accepts "inf" and "NaN"; a CSV number must contain a digit.
    if !cell.bytes().any(|b| b.is_ascii_digit()) {
        return None;
    }
    cell.parse::<f64>().ok().filter(|r| r.is_finite())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub ty: ColumnType,
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("file has no header row")]
    EmptyFile,
    #[error("line {line}: expected {expected} cells, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: column '{column}' was inferred as {ty} but holds '{cell}'")]
    TypeInferenceConflict {
        line: u64,
        column: String,
        ty: ColumnType,
        cell: String,
    },
    #[error("duplicate column '{0}'")]
    DuplicateColumn(String),
    #[error("row {row} does not match the column layout")]
    BadRow { row: usize },
}

/// Immutable, typed, in-memory table.
pub struct Table {
    name: String,
    columns: Vec<Column>,
    rows: Vec<Vec<Value>>,
    /// Per column: first row index for each key, built on first lookup.
    indexes: Vec<OnceLock<HashMap<Key, usize>>>,
}

/// Hashable form of a lookup key; integral reals and integers coincide.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Key {
    Int(i64),
    Real(u64),
    Bool(bool),
    Text(String),
    Other(String),
}

impl Key {
    fn of(v: &Value) -> Key {
        match v {
            Value::Int(i) => Key::Int(*i),
            Value::Real(r) if r.fract() == 0.0 && r.abs() < 9.0e15 => Key::Int(*r as i64),
            Value::Real(r) => Key::Real(r.to_bits()),
            Value::Bool(b) => Key::Bool(*b),
            Value::Text(s) => Key::Text(s.clone()),
            other => Key::Other(other.to_string()),
        }
    }
}

impl fmt::Debug for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Table")
            .field("name", &self.name)
            .field("columns", &self.columns)
            .field("rows", &self.rows.len())
            .finish()
    }
}

impl Clone for Table {
    fn clone(&self) -> Self {
        Table::new(&self.name, self.columns.clone(), self.rows.clone()).expect("already checked")
    }
}

impl PartialEq for Table {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.columns == other.columns && self.rows == other.rows
    }
}

impl Table {
    pub fn new(name: &str, columns: Vec<Column>, rows: Vec<Vec<Value>>) -> Result<Self, TableError> {
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].iter().any(|p| p.name == c.name) {
                return Err(TableError::DuplicateColumn(c.name.clone()));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() || !row.iter().zip(&columns).all(|(v, c)| c.ty.admits(v)) {
                return Err(TableError::BadRow { row: i });
            }
        }
        Ok(Table {
            name: name.to_owned(),
            indexes: columns.iter().map(|_| OnceLock::new()).collect(),
            columns,
            rows,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<impl Iterator<Item = &Value>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(move |r| &r[i]))
    }

    /// Value of `value_column` in the first row whose `key_column` equals `key`.
    pub fn lookup(&self, key_column: &str, key: &Value, value_column: &str) -> Result<&Value, EvalError> {
        let unknown = |column: &str| EvalError::UnknownColumn {
            table: self.name.clone(),
            column: column.to_owned(),
        };
        let k = self.column_index(key_column).ok_or_else(|| unknown(key_column))?;
        let v = self
            .column_index(value_column)
            .ok_or_else(|| unknown(value_column))?;
        let index = self.indexes[k].get_or_init(|| {
            let mut map = HashMap::new();
            for (i, row) in self.rows.iter().enumerate() {
                map.entry(Key::of(&row[k])).or_insert(i);
            }
            map
        });
        index
            .get(&Key::of(key))
            .map(|&row| &self.rows[row][v])
            .ok_or_else(|| EvalError::KeyNotFound {
                table: self.name.clone(),
                key: key.to_string(),
            })
    }

    pub fn from_reader(name: &str, reader: impl Read) -> Result<Self, TableError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut records = rdr.records();
        let header = match records.next() {
            Some(r) => r?,
            None => return Err(TableError::EmptyFile),
        };
        let names: Vec<String> = header.iter().map(str::to_owned).collect();
        let mut body = Vec::new();
        for rec in records {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != names.len() {
                return Err(TableError::RaggedRow {
                    line,
                    expected: names.len(),
                    found: rec.len(),
                });
            }
            body.push((line, rec));
        }

        let head = &body[..body.len().min(INFERENCE_ROWS)];
        let columns: Vec<Column> = names
            .into_iter()
            .enumerate()
            .map(|(i, name)| Column {
                name,
                ty: ColumnType::infer(head.iter().map(move |(_, r)| &r[i])),
            })
            .collect();

        let mut rows = Vec::with_capacity(body.len());
        for (line, rec) in &body {
            let row = rec
                .iter()
                .zip(&columns)
                .map(|(cell, col)| {
                    col.ty
                        .parse(cell)
                        .ok_or_else(|| TableError::TypeInferenceConflict {
                            line: *line,
                            column: col.name.clone(),
                            ty: col.ty,
                            cell: cell.to_owned(),
                        })
                })
                .collect::<Result<_, _>>()?;
            rows.push(row);
        }
        Table::new(name, columns, rows)
    }

    /// Writes RFC-4180 CSV with LF line endings.
    pub fn write_csv(&self, writer: impl Write) -> Result<(), TableError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| match v {
                Value::Real(r) => format_real(*r),
                other => other.to_string(),
            }))?;
        }
        w.flush().map_err(|e| TableError::Io {
            path: String::new(),
            source: e,
        })
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), TableError> {
        let io = |source| TableError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = std::fs::File::create(path).map_err(io)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Reads a CSV file with a mandatory header row and infers column types.
pub fn load_csv_table(path: &Path, name: &str) -> Result<Table, TableError> {
    let file = std::fs::File::open(path).map_err(|source| TableError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Table::from_reader(name, std::io::BufReader::new(file))
}

/// Named tables visible to relations during evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TableStore {
    tables: BTreeMap<String, Arc<Table>>,
}

impl TableStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replaces any table already registered under the same name.
    pub fn insert(&mut self, table: Table) {
        self.tables.insert(table.name.clone(), Arc::new(table));
    }

    pub fn get(&self, name: &str) -> Option<&Table> {
        self.tables.get(name).map(Arc::as_ref)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// Adds the tables of `other` whose names are not yet taken.
    pub fn extend_missing(&mut self, other: &TableStore) {
        for (k, v) in &other.tables {
            self.tables.entry(k.clone()).or_insert_with(|| Arc::clone(v));
        }
    }

    pub fn lookup(
        &self,
        table: &str,
        key_column: &str,
        key: &Value,
        value_column: &str,
    ) -> Result<Value, EvalError> {
        self.get(table)
            .ok_or_else(|| EvalError::UnknownTable(table.to_owned()))?
            .lookup(key_column, key, value_column)
            .cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Table, TableError> {
        Table::from_reader("t", text.as_bytes())
    }

    #[test]
    fn infers_column_types() {
        let t = parse("h,ghi,sunny,label\n1,0.5,TRUE,a\r\n2,3,false,\"b,c\"\n").unwrap();
        let types: Vec<_> = t.columns().iter().map(|c| c.ty).collect();
        assert_eq!(
            types,
            [
                ColumnType::Integer,
                ColumnType::Real,
                ColumnType::Boolean,
                ColumnType::Text
            ]
        );
        assert_eq!(
            t.rows()[1],
            [
                Value::Int(2),
                Value::Real(3.0),
                Value::Bool(false),
                Value::text("b,c")
            ]
        );
        assert_eq!(parse("x\nnan\ninf\n").unwrap().columns()[0].ty, ColumnType::Text);
    }

    #[test]
    fn header_only_and_empty() {
        assert_eq!(parse("a,b,c\n").unwrap().row_count(), 0);
        assert!(matches!(parse(""), Err(TableError::EmptyFile)));
    }

    #[test]
    fn ragged_row() {
        let err = parse("a,b,c\n1,2,3\n4,5\n").unwrap_err();
        assert!(
            matches!(
                err,
                TableError::RaggedRow {
                    line: 3,
                    expected: 3,
                    found: 2
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn late_type_conflict_is_an_error() {
        let mut text = String::from("n\n");
        for i in 0..INFERENCE_ROWS {
            text.push_str(&format!("{i}\n"));
        }
        text.push_str("oops\n");
        let err = parse(&text).unwrap_err();
        assert!(
            matches!(&err, TableError::TypeInferenceConflict { line, cell, .. } if *line == 102 && cell == "oops"),
            "{err}"
        );
    }

    #[test]
    fn csv_round_trip_uses_lf() {
        let t = parse("k,v\r\n1,2.0\r\n2,\"x\"\"y\"\r\n").unwrap();
        let out = t.to_csv_string();
        assert!(!out.contains('\r'));
        assert_eq!(parse(&out).unwrap(), t);
    }

    #[test]
    fn lookup_matches_row_scan() {
        let t = parse("hour,kw\n1,0.0\n2,1.5\n2,9.9\n3,2.5\n").unwrap();
        for key in [Value::Int(2), Value::Real(2.0)] {
            assert_eq!(t.lookup("hour", &key, "kw").unwrap(), &Value::Real(1.5));
        }
        assert!(matches!(
            t.lookup("hour", &Value::Int(7), "kw"),
            Err(EvalError::KeyNotFound { .. })
        ));
        assert!(matches!(
            t.lookup("day", &Value::Int(1), "kw"),
            Err(EvalError::UnknownColumn { .. })
        ));
        let mut store = TableStore::new();
        store.insert(t);
        assert_eq!(
            store.lookup("t", "hour", &Value::Int(3), "kw").unwrap(),
            Value::Real(2.5)
        );
        assert!(matches!(
            store.lookup("u", "hour", &Value::Int(3), "kw"),
            Err(EvalError::UnknownTable(_))
        ));
    }
}
