//! CSV input: comma separated, header row required, numeric cells only.

use std::path::Path;

use crate::error::CliError;

/// What a file is expected to contain, used both to check the width and to
/// tell the user what was expected.
#[derive(Debug, Clone)]
pub struct Schema {
    pub expected: String,
    pub width: Option<usize>,
}

impl Schema {
    pub fn exact(expected: impl Into<String>, width: usize) -> Self {
        Self {
            expected: expected.into(),
            width: Some(width),
        }
    }

    pub fn any_width(expected: impl Into<String>) -> Self {
        Self {
            expected: expected.into(),
            width: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    /// The single column of a one-column table.
    pub fn column(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r[0]).collect()
    }
}

fn looks_numeric(field: &str) -> bool {
    field.trim().parse::<f64>().is_ok()
}

pub fn read_table(path: &Path, schema: &Schema) -> Result<Table, CliError> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(CliError::MissingHeader {
            path: path.to_path_buf(),
            expected: schema.expected.clone(),
        });
    }
    if header.iter().all(looks_numeric) {
        return Err(CliError::MissingHeader {
            path: path.to_path_buf(),
            expected: schema.expected.clone(),
        });
    }
    if let Some(w) = schema.width {
        if header.len() != w {
            return Err(CliError::Schema {
                path: path.to_path_buf(),
                detail: format!("found {} column(s) [{}], need {w}", header.len(), header.iter().collect::<Vec<_>>().join(", ")),
                expected: schema.expected.clone(),
            });
        }
    }
    let columns: Vec<String> = header.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, token)| {
                token.parse::<f64>().map_err(|_| CliError::Cell {
                    path: path.to_path_buf(),
                    row: i + 1,
                    column: j + 1,
                    name: columns[j].clone(),
                    token: token.to_string(),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Schema {
            path: path.to_path_buf(),
            detail: "no data rows".into(),
            expected: schema.expected.clone(),
        });
    }
    Ok(Table { columns, rows })
}
