//! Advantage-weighted batch export for external trainers.

use std::fs;
use std::path::{Path, PathBuf};

use backtrans_core::buffer::ReplayBuffer;
use backtrans_core::optim::export_records;
use serde::{Deserialize, Serialize};

use crate::config::HarnessConfig;
use crate::error::HarnessError;
use crate::jsonl;

/// Training settings written next to every export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportMeta {
    pub records: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub minibatch_size: usize,
    pub kl_beta: f64,
    pub k_samples: usize,
    pub max_response_tokens: u32,
    pub eps_std: f64,
}

impl ExportMeta {
    pub fn from_config(config: &HarnessConfig, records: usize) -> Self {
        Self {
            records,
            learning_rate: config.export_learning_rate,
            batch_size: config.batch_size,
            minibatch_size: config.minibatch_size,
            kl_beta: config.kl_beta,
            k_samples: config.k_samples,
            max_response_tokens: config.max_response_tokens,
            eps_std: config.eps_std,
        }
    }
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".meta.json");
    path.with_file_name(name)
}

/// Writes one record per selected buffer index, with advantages computed
/// now, plus a `.meta.json` sidecar. Returns the number of records.
pub fn export_batch(
    buffer: &ReplayBuffer,
    selection: &[usize],
    path: &Path,
    config: &HarnessConfig,
) -> Result<usize, HarnessError> {
    let records = export_records(buffer, selection)?;
    jsonl::write_file(path, &records)?;
    let meta = ExportMeta::from_config(config, records.len());
    let sidecar = meta_path(path);
    let text =
        serde_json::to_string_pretty(&meta).map_err(|e| HarnessError::Config(e.to_string()))?;
    fs::write(&sidecar, text + "\n").map_err(|e| HarnessError::io(&sidecar, e))?;
    Ok(records.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use backtrans_core::buffer::{BufferEntry, Direction};
    use backtrans_core::optim::ExportRecord;

    fn buffer() -> ReplayBuffer {
        let mut b = ReplayBuffer::new(16).unwrap();
        for (i, r) in [0.2, 0.9, 0.4, 0.0].into_iter().enumerate() {
            let dir = if i % 2 == 0 {
                Direction::Code2Doc
            } else {
                Direction::Doc2Code
            };
            b.push(BufferEntry::new(
                dir,
                &format!("p{i}"),
                &format!("c{i}"),
                r,
                i as u64,
            ))
            .unwrap();
        }
        b
    }

    #[test]
    fn empty_selection_creates_an_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("batch.jsonl");
        assert_eq!(
            export_batch(&buffer(), &[], &path, &HarnessConfig::default()).unwrap(),
            0
        );
        assert_eq!(fs::read_to_string(&path).unwrap(), "");
        assert!(meta_path(&path).exists());
    }

    #[test]
    fn records_round_trip_with_buffer_advantages() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("batch.jsonl");
        let b = buffer();
        let n = export_batch(&b, &[3, 0, 1], &path, &HarnessConfig::default()).unwrap();
        assert_eq!(n, 3);
        let back: Vec<ExportRecord> = jsonl::read_file(&path).unwrap();
        assert_eq!(back, export_records(&b, &[3, 0, 1]).unwrap());
        for (rec, idx) in back.iter().zip([3, 0, 1]) {
            let entry = b.get(idx).unwrap();
            assert_eq!(rec.prompt, entry.input);
            assert_eq!(rec.completion, entry.output);
            assert_eq!(rec.advantage, b.advantage(entry).unwrap());
        }
        let meta: ExportMeta =
            serde_json::from_str(&fs::read_to_string(meta_path(&path)).unwrap()).unwrap();
        assert_eq!(meta.learning_rate, 1e-6);
        assert_eq!(
            (meta.batch_size, meta.minibatch_size, meta.records),
            (64, 32, 3)
        );
    }
}
