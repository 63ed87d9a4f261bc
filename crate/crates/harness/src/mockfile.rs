//! Mock fixture files: a JSON object mapping hex prompt hashes to scripted
//! completions.

use std::collections::BTreeMap;
use std::path::Path;

use backtrans_core::backend::MockBackend;

use crate::error::HarnessError;

pub type FixtureMap = BTreeMap<String, Vec<String>>;

pub fn load_mock(path: &Path) -> Result<MockBackend, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let map: FixtureMap = serde_json::from_str(&text).map_err(|e| HarnessError::Format {
        path: path.into(),
        line: e.line(),
        message: e.to_string(),
    })?;
    Ok(MockBackend::from_hex_entries(map)?)
}
