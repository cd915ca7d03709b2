//! Observation files: one numeric column, optional `y` header.

use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum DataError {
    Io { path: PathBuf, source: std::io::Error },
    Parse { line: u64, message: String },
    Empty(PathBuf),
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataError::Io { path, source } => write!(f, "cannot read {}: {source}", path.display()),
            DataError::Parse { line, message } => write!(f, "line {line}: {message}"),
            DataError::Empty(path) => write!(f, "{} holds no observations", path.display()),
        }
    }
}

impl std::error::Error for DataError {}

pub fn load_csv(path: &Path) -> Result<Vec<f64>, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    read_values(file).and_then(|v| if v.is_empty() { Err(DataError::Empty(path.to_path_buf())) } else { Ok(v) })
}

fn read_values(input: impl std::io::Read) -> Result<Vec<f64>, DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DataError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(row as u64 + 1, |p| p.line());
        if record.len() != 1 {
            return Err(DataError::Parse { line, message: format!("expected one column, found {}", record.len()) });
        }
        let field = record[0].trim();
        if row == 0 && field == "y" {
            continue;
        }
        let value: f64 = field
            .parse()
            .map_err(|_| DataError::Parse { line, message: format!("{field:?} is not a number") })?;
        if !value.is_finite() {
            return Err(DataError::Parse { line, message: format!("non-finite value {field:?}") });
        }
        out.push(value);
    }
    Ok(out)
}
