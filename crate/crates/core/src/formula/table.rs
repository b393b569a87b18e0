use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Column {
    Numeric { values: Vec<f64> },
    /// `codes[i]` indexes into `levels`; `levels[0]` is the reference level.
    Categorical { levels: Vec<String>, codes: Vec<usize> },
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric { values } => values.len(),
            Column::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Column-type hints for [`read_table`].
///
/// JSON form: `{"categorical": {"health": ["average", "poor", "excellent"], "region": null}}`.
/// A `null` level list keeps first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default)]
    pub categorical: BTreeMap<String, Option<Vec<String>>>,
}

impl Schema {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid schema: {e}")))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// `<stem>.schema.json` next to a CSV, if present.
    pub fn sidecar_for(csv: impl AsRef<Path>) -> Result<Option<Self>> {
        let csv = csv.as_ref();
        let Some(stem) = csv.file_stem() else { return Ok(None) };
        let candidate = csv.with_file_name(format!("{}.schema.json", stem.to_string_lossy()));
        if candidate.is_file() {
            Self::from_path(candidate).map(Some)
        } else {
            Ok(None)
        }
    }
}

/// Rectangular named-column dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataTable {
    names: Vec<String>,
    columns: Vec<Column>,
    n_rows: usize,
}

impl DataTable {
    pub fn new(columns: Vec<(String, Column)>) -> Result<Self> {
        let n_rows = columns.first().map(|(_, c)| c.len()).unwrap_or(0);
        let mut names = Vec::with_capacity(columns.len());
        let mut cols = Vec::with_capacity(columns.len());
        for (name, col) in columns {
            if col.len() != n_rows {
                return Err(Error::data(None, format!("column '{name}' has {} rows, expected {n_rows}", col.len())));
            }
            if names.contains(&name) {
                return Err(Error::data(None, format!("duplicate column '{name}'")));
            }
            if let Column::Categorical { levels, codes } = &col {
                if let Some(i) = codes.iter().position(|&c| c >= levels.len()) {
                    return Err(Error::data(Some(i), format!("level code out of range in '{name}'")));
                }
            }
            names.push(name);
            cols.push(col);
        }
        Ok(DataTable {
            names,
            columns: cols,
            n_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::data(None, format!("no column named '{name}'")))
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64]> {
        match self.column(name)? {
            Column::Numeric { values } => Ok(values),
            Column::Categorical { .. } => Err(Error::data(None, format!("column '{name}' is categorical"))),
        }
    }

    /// Rows in the given order, as a new table.
    pub fn select_rows(&self, rows: &[usize]) -> DataTable {
        let columns = self
            .columns
            .iter()
            .map(|c| match c {
                Column::Numeric { values } => Column::Numeric {
                    values: rows.iter().map(|&i| values[i]).collect(),
                },
                Column::Categorical { levels, codes } => Column::Categorical {
                    levels: levels.clone(),
                    codes: rows.iter().map(|&i| codes[i]).collect(),
                },
            })
            .collect();
        DataTable {
            names: self.names.clone(),
            columns,
            n_rows: rows.len(),
        }
    }

    /// Replace (or add) a numeric column.
    pub fn with_numeric(mut self, name: &str, values: Vec<f64>) -> Result<DataTable> {
        if values.len() != self.n_rows {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows,
                got: values.len(),
            });
        }
        match self.names.iter().position(|n| n == name) {
            Some(i) => self.columns[i] = Column::Numeric { values },
            None => {
                self.names.push(name.to_string());
                self.columns.push(Column::Numeric { values });
            }
        }
        Ok(self)
    }
}

/// Read a comma-separated file with a header row.
///
/// Columns whose every field parses as a number are numeric unless the
/// schema declares them categorical; all other columns are categorical.
pub fn read_table(path: impl AsRef<Path>, schema: Option<&Schema>) -> Result<DataTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_table_from(file, schema)
}

pub fn read_table_from<R: std::io::Read>(reader: R, schema: Option<&Schema>) -> Result<DataTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::data(None, "missing header row"));
    }
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        for (j, field) in rec.iter().enumerate() {
            let field = field.trim();
            if field.is_empty() {
                return Err(Error::data(Some(row), format!("empty field in column '{}'", headers[j])));
            }
            raw[j].push(field.to_string());
        }
    }
    if raw[0].is_empty() {
        return Err(Error::data(None, "no data rows"));
    }

    let default_schema = Schema::default();
    let schema = schema.unwrap_or(&default_schema);
    for name in schema.categorical.keys() {
        if !headers.contains(name) {
            return Err(Error::Config(format!("schema names unknown column '{name}'")));
        }
    }
    let mut columns = Vec::with_capacity(headers.len());
    for (name, fields) in headers.into_iter().zip(raw) {
        let declared = schema.categorical.get(&name);
        let numeric: Option<Vec<f64>> = if declared.is_some() {
            None
        } else {
            fields.iter().map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite())).collect()
        };
        let col = match numeric {
            Some(values) => Column::Numeric { values },
            None => categorical(&name, &fields, declared.cloned().flatten())?,
        };
        columns.push((name, col));
    }
    DataTable::new(columns)
}

fn categorical(name: &str, fields: &[String], order: Option<Vec<String>>) -> Result<Column> {
    let mut levels: Vec<String> = order.unwrap_or_default();
    let fixed = !levels.is_empty();
    let mut codes = Vec::with_capacity(fields.len());
    for (row, f) in fields.iter().enumerate() {
        let code = match levels.iter().position(|l| l == f) {
            Some(c) => c,
            None if fixed => {
                return Err(Error::data(Some(row), format!("value '{f}' is not a declared level of '{name}'")));
            }
            None => {
                levels.push(f.clone());
                levels.len() - 1
            }
        };
        codes.push(code);
    }
    Ok(Column::Categorical { levels, codes })
}

fn csv_error(e: csv::Error) -> Error {
    let row = e.position().map(|p| p.record() as usize);
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::data(
            row.map(|r| r.saturating_sub(1)),
            format!("ragged row: {len} fields, expected {expected_len}"),
        ),
        csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
        _ => Error::data(row, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_numeric_and_categorical() {
        let t = read_table_from("y,x,g\n1,0.5,b\n0,1.5,a\n3,2,b\n".as_bytes(), None).unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.numeric("x").unwrap(), &[0.5, 1.5, 2.0]);
        match t.column("g").unwrap() {
            Column::Categorical { levels, codes } => {
                assert_eq!(levels, &["b", "a"]);
                assert_eq!(codes, &[0, 1, 0]);
            }
            _ => panic!("expected categorical"),
        }
    }

    #[test]
    fn schema_orders_levels() {
        let schema = Schema::from_json(r#"{"categorical": {"g": ["a", "b"], "y": null}}"#).unwrap();
        let t = read_table_from("y,g\n1,b\n0,a\n".as_bytes(), Some(&schema)).unwrap();
        assert_eq!(
            t.column("g").unwrap(),
            &Column::Categorical {
                levels: vec!["a".into(), "b".into()],
                codes: vec![1, 0]
            }
        );
        assert!(matches!(t.column("y").unwrap(), Column::Categorical { .. }));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            read_table_from("y,x\n1,2\n3\n".as_bytes(), None),
            Err(Error::Data { row: Some(1), .. })
        ));
        assert!(matches!(
            read_table_from("y,x\n1,2\n3,\n".as_bytes(), None),
            Err(Error::Data { row: Some(1), .. })
        ));
        assert!(read_table_from("".as_bytes(), None).is_err());
        assert!(read_table_from("y,x\n".as_bytes(), None).is_err());
        let schema = Schema::from_json(r#"{"categorical": {"g": ["a"]}}"#).unwrap();
        assert!(read_table_from("g\nb\n".as_bytes(), Some(&schema)).is_err());
        assert!(read_table("/nonexistent/file.csv", None).is_err());
    }
}
