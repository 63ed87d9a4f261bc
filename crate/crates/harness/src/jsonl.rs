//! Line-delimited JSON readers and writers.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::HarnessError;

pub fn write_records<T: Serialize, W: Write + ?Sized>(
    out: &mut W,
    records: &[T],
) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes `records` to `path`, one JSON object per line. Creates the file
/// even when `records` is empty.
pub fn write_file<T: Serialize>(path: &Path, records: &[T]) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_records(&mut out, records)
        .and_then(|()| out.flush())
        .map_err(|e| HarnessError::io(path, e))
}

/// Reads every non-blank line of `path` as a `T`.
pub fn read_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| HarnessError::Format {
            path: path.into(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}
