//! Reading gradient dumps and writing result files.

use std::fs;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    fn parse(path: &Path, message: impl Into<String>) -> Self {
        IoError::Parse {
            path: path.display().to_string(),
            message: message.into(),
        }
    }
}

/// Raw little-endian f32 values.
pub fn read_f32_le(path: &Path) -> Result<Vec<f64>, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(IoError::parse(
            path,
            format!("length {} is not a multiple of 4", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect())
}

pub fn write_f32_le(path: &Path, values: &[f64]) -> Result<(), IoError> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    fs::write(path, out).map_err(|e| IoError::io(path, e))
}

/// One value per row; a non-numeric first row is treated as a header.
pub fn read_csv_column(path: &Path) -> Result<Vec<f64>, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| IoError::parse(path, e.to_string()))?;
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| IoError::parse(path, e.to_string()))?;
        let Some(field) = record.get(0) else { continue };
        let field = field.trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if row == 0 => {}
            Err(_) => {
                return Err(IoError::parse(
                    path,
                    format!("row {}: not a number: {field:?}", row + 1),
                ))
            }
        }
    }
    Ok(values)
}

/// Dispatches on extension: `.csv`/`.txt` are text, anything else is f32.
pub fn read_gradients(path: &Path) -> Result<Vec<f64>, IoError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") | Some("txt") => read_csv_column(path),
        _ => read_f32_le(path),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| IoError::parse(path, e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| IoError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| IoError::parse(path, e.to_string()))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|e| IoError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|e| IoError::io(path, e))
}
