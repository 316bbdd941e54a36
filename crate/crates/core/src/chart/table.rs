use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ChartError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Json,
}

impl std::str::FromStr for TableFormat {
    type Err = ChartError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            other => Err(ChartError::MalformedInput {
                location: "format".into(),
                message: format!("unsupported table format `{other}`"),
            }),
        }
    }
}

/// Temporal columns are detected by name only and behave as ordered
/// categoricals; no date arithmetic is performed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Temporal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Number(f64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Cell::Number(v) => format_number(*v),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

pub(crate) fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataTable {
    columns: Vec<Column>,
    rows: Vec<Vec<Cell>>,
    title: Option<String>,
}

impl DataTable {
    /// Builds a table from raw string cells, inferring column kinds.
    pub fn from_raw(headers: Vec<String>, raw_rows: Vec<Vec<Option<String>>>) -> Result<Self, ChartError> {
        if raw_rows.is_empty() {
            return Err(ChartError::EmptyTable);
        }
        let width = headers.len();
        for (i, row) in raw_rows.iter().enumerate() {
            if row.len() != width {
                return Err(ChartError::MalformedInput {
                    location: format!("row {}", i + 1),
                    message: format!("expected {width} fields, found {}", row.len()),
                });
            }
        }
        let mut columns = Vec::with_capacity(width);
        for (c, name) in headers.iter().enumerate() {
            let mut any = false;
            let numeric = raw_rows.iter().all(|row| match row[c].as_deref() {
                None => true,
                Some(s) => {
                    any = true;
                    parse_number(s).is_some()
                }
            });
            let kind = if numeric && any {
                ColumnKind::Numeric
            } else if is_temporal_name(name) {
                ColumnKind::Temporal
            } else {
                ColumnKind::Categorical
            };
            columns.push(Column {
                name: name.clone(),
                kind,
            });
        }
        if !columns.iter().any(|c| c.kind == ColumnKind::Numeric) {
            return Err(ChartError::NoNumericColumn);
        }
        let rows = raw_rows
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .zip(&columns)
                    .map(|(cell, col)| match cell {
                        None => Cell::Empty,
                        Some(s) if col.kind == ColumnKind::Numeric => {
                            Cell::Number(parse_number(&s).expect("checked during inference"))
                        }
                        Some(s) => Cell::Text(s),
                    })
                    .collect()
            })
            .collect();
        Ok(DataTable {
            columns,
            rows,
            title: None,
        })
    }

    pub fn with_title(mut self, title: impl Into<String>) -> Self {
        let t = title.into();
        self.title = if t.trim().is_empty() { None } else { Some(t) };
        self
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn title(&self) -> Option<&str> {
        self.title.as_deref()
    }

    pub fn column_index(&self, name: &str) -> Result<usize, ChartError> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| ChartError::ColumnMissing(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<(&Column, Vec<&Cell>), ChartError> {
        let idx = self.column_index(name)?;
        Ok((&self.columns[idx], self.rows.iter().map(|r| &r[idx]).collect()))
    }

    /// First numeric column, then the first column that is not it; a
    /// reasonable default binding when the caller names none.
    pub fn default_xy(&self) -> (String, String) {
        let x = self
            .columns
            .iter()
            .position(|c| c.kind != ColumnKind::Numeric)
            .unwrap_or(0);
        let y = self
            .columns
            .iter()
            .enumerate()
            .position(|(i, c)| i != x && c.kind == ColumnKind::Numeric)
            .unwrap_or(x);
        (self.columns[x].name.clone(), self.columns[y].name.clone())
    }
}

fn parse_number(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn is_temporal_name(name: &str) -> bool {
    const WORDS: &[&str] = &["date", "time", "year", "month", "day", "week", "quarter"];
    let lower = name.to_ascii_lowercase();
    WORDS.iter().any(|w| lower.contains(w))
}

/// Parses CSV (header row required) or JSON (array of flat objects).
pub fn parse_table(bytes: &[u8], format: TableFormat) -> Result<DataTable, ChartError> {
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Err(ChartError::MalformedInput {
            location: "input".into(),
            message: "input is empty".into(),
        });
    }
    let text = std::str::from_utf8(bytes).map_err(|e| ChartError::MalformedInput {
        location: format!("byte {}", e.valid_up_to()),
        message: "input is not valid UTF-8".into(),
    })?;
    match format {
        TableFormat::Csv => parse_csv(text),
        TableFormat::Json => parse_json(text),
    }
}

fn parse_csv(text: &str) -> Result<DataTable, ChartError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.iter().all(|h| h.is_empty()) {
        return Err(ChartError::MalformedInput {
            location: "line 1".into(),
            message: "missing header row".into(),
        });
    }
    if let Some(dup) = first_duplicate(&headers) {
        return Err(ChartError::MalformedInput {
            location: "line 1".into(),
            message: format!("duplicate column `{dup}`"),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        rows.push(
            record
                .iter()
                .map(|s| (!s.is_empty()).then(|| s.to_string()))
                .collect(),
        );
    }
    DataTable::from_raw(headers, rows)
}

fn csv_error(e: csv::Error) -> ChartError {
    let location = match e.position() {
        Some(p) => format!("line {}", p.line()),
        None => "csv".into(),
    };
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} fields, found {len}"),
        _ => e.to_string(),
    };
    ChartError::MalformedInput { location, message }
}

fn first_duplicate(headers: &[String]) -> Option<&str> {
    headers
        .iter()
        .enumerate()
        .find(|(i, h)| headers[..*i].contains(h))
        .map(|(_, h)| h.as_str())
}

fn parse_json(text: &str) -> Result<DataTable, ChartError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ChartError::MalformedInput {
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let Value::Array(items) = value else {
        return Err(ChartError::MalformedInput {
            location: "root".into(),
            message: "expected an array of objects".into(),
        });
    };
    let mut headers: Vec<String> = Vec::new();
    let mut objects = Vec::with_capacity(items.len());
    for (i, item) in items.into_iter().enumerate() {
        let Value::Object(map) = item else {
            return Err(ChartError::MalformedInput {
                location: format!("element {i}"),
                message: "expected a flat object".into(),
            });
        };
        for key in map.keys() {
            if !headers.contains(key) {
                headers.push(key.clone());
            }
        }
        objects.push(map);
    }
    let mut rows = Vec::with_capacity(objects.len());
    for (i, map) in objects.iter().enumerate() {
        let mut row = Vec::with_capacity(headers.len());
        for key in &headers {
            let cell = match map.get(key) {
                None | Some(Value::Null) => None,
                Some(Value::Number(n)) => Some(n.to_string()),
                Some(Value::String(s)) if s.trim().is_empty() => None,
                Some(Value::String(s)) => Some(s.clone()),
                Some(Value::Bool(b)) => Some(b.to_string()),
                Some(_) => {
                    return Err(ChartError::MalformedInput {
                        location: format!("element {i}, field `{key}`"),
                        message: "nested values are not supported".into(),
                    })
                }
            };
            row.push(cell);
        }
        rows.push(row);
    }
    DataTable::from_raw(headers, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_year_area() {
        let t = parse_table(b"year,area\n2000,3.1\n2001,3.4", TableFormat::Csv).unwrap();
        assert_eq!(t.columns().len(), 2);
        assert_eq!(t.row_count(), 2);
        assert!(t.columns().iter().all(|c| c.kind == ColumnKind::Numeric));
        assert_eq!(t.rows()[1][1], Cell::Number(3.4));
    }

    #[test]
    fn json_single_object() {
        let t = parse_table(br#"[{"x":1,"y":2}]"#, TableFormat::Json).unwrap();
        assert_eq!(t.row_count(), 1);
        assert_eq!(t.columns().len(), 2);
        assert!(t.columns().iter().all(|c| c.kind == ColumnKind::Numeric));
    }

    #[test]
    fn header_only_csv_is_empty() {
        assert_eq!(
            parse_table(b"a\n", TableFormat::Csv).unwrap_err(),
            ChartError::EmptyTable
        );
    }

    #[test]
    fn text_only_table_has_no_numeric_column() {
        assert_eq!(
            parse_table(b"a,b\nx,y\n", TableFormat::Csv).unwrap_err(),
            ChartError::NoNumericColumn
        );
    }

    #[test]
    fn ragged_csv_reports_line() {
        let err = parse_table(b"a,b\n1,2\n3\n", TableFormat::Csv).unwrap_err();
        match err {
            ChartError::MalformedInput { location, .. } => assert_eq!(location, "line 3"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_cells_do_not_block_numeric_inference() {
        let t = parse_table(b"name,v\na,1\nb,\nc,3\n", TableFormat::Csv).unwrap();
        assert_eq!(t.columns()[1].kind, ColumnKind::Numeric);
        assert_eq!(t.rows()[1][1], Cell::Empty);
        assert_eq!(t.columns()[0].kind, ColumnKind::Categorical);
    }

    #[test]
    fn non_numeric_date_column_is_temporal() {
        let t = parse_table(b"date,v\n2020-01,1\n2020-02,3\n", TableFormat::Csv).unwrap();
        assert_eq!(t.columns()[0].kind, ColumnKind::Temporal);
    }

    #[test]
    fn json_nested_value_is_rejected_with_field() {
        let err = parse_table(br#"[{"x":1,"y":[1]}]"#, TableFormat::Json).unwrap_err();
        assert!(matches!(err, ChartError::MalformedInput { ref location, .. } if location.contains("`y`")));
    }

    #[test]
    fn json_keys_keep_document_order() {
        let t = parse_table(br#"[{"zeta":"a","alpha":2}]"#, TableFormat::Json).unwrap();
        assert_eq!(t.columns()[0].name, "zeta");
        assert_eq!(t.default_xy(), ("zeta".to_string(), "alpha".to_string()));
    }

    #[test]
    fn empty_bytes_are_malformed() {
        assert!(matches!(
            parse_table(b"", TableFormat::Csv),
            Err(ChartError::MalformedInput { .. })
        ));
    }
}
