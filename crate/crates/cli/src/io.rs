//! CSV matrices (row-major, no header unless asked) and atomic file writes.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{CliError, CliResult};

/// Write `bytes` to a temporary file beside `path`, then rename it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn load_matrix(path: &Path, header: bool) -> CliResult<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(path, e.to_string()))?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::data(path, e.to_string()))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(CliError::data(
                    path,
                    format!(
                        "ragged rows: row {} has {} cells, expected {c}",
                        r + 1,
                        record.len()
                    ),
                ))
            }
            _ => {}
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                CliError::data(
                    path,
                    format!(
                        "non-numeric cell {cell:?} at row {}, column {}",
                        r + 1,
                        c + 1
                    ),
                )
            })?;
            if !v.is_finite() {
                return Err(CliError::data(
                    path,
                    format!("non-finite value at row {}, column {}", r + 1, c + 1),
                ));
            }
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols
        .filter(|_| rows > 0)
        .ok_or_else(|| CliError::data(path, "empty input"))?;
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

/// Shortest round-trip formatting, so loading gives back identical values.
pub fn matrix_to_csv(m: &DMatrix<f64>, header: bool) -> String {
    let mut out = String::new();
    if header {
        let names: Vec<String> = (0..m.ncols()).map(|c| format!("c{c}")).collect();
        out.push_str(&names.join(","));
        out.push('\n');
    }
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn store_matrix(m: &DMatrix<f64>, path: &Path, header: bool) -> CliResult<()> {
    write_atomic(path, matrix_to_csv(m, header).as_bytes())
}

pub fn store_json<T: serde::Serialize>(value: &T, path: &Path) -> CliResult<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::data(path, e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}
