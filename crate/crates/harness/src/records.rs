//! On-disk records: the rollout log (one group per line) and buffer dumps.

use std::path::Path;

use backtrans_core::buffer::{dynamic_filter_by, BufferEntry, ReplayBuffer};
use backtrans_core::rollout::RolloutGroup;
use serde::{Deserialize, Serialize};

use crate::config::HarnessConfig;
use crate::error::HarnessError;
use crate::jsonl;

/// One line of a rollout log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub group_id: u64,
    /// Index of the source snippet in the corpus.
    pub snippet: usize,
    pub group: RolloutGroup,
}

/// Outcome of filling a buffer from a rollout log.
#[derive(Debug)]
pub struct Replay {
    pub buffer: ReplayBuffer,
    pub kept_groups: usize,
    pub filtered_groups: usize,
}

pub fn empty_buffer(config: &HarnessConfig) -> Result<ReplayBuffer, HarnessError> {
    Ok(ReplayBuffer::new(config.buffer_capacity)?
        .with_eps(config.eps_std)
        .with_scope(config.stats_scope))
}

/// Applies dynamic sampling to the logged groups and stores the survivors
/// in log order.
pub fn replay_log(
    records: Vec<GroupRecord>,
    config: &HarnessConfig,
) -> Result<Replay, HarnessError> {
    let mut buffer = empty_buffer(config)?;
    let total = records.len();
    let kept = dynamic_filter_by(records, |r| &r.group);
    for record in &kept {
        buffer.push_group(&record.group, record.group_id)?;
    }
    Ok(Replay {
        buffer,
        kept_groups: kept.len(),
        filtered_groups: total - kept.len(),
    })
}

pub fn dump_buffer(buffer: &ReplayBuffer, path: &Path) -> Result<(), HarnessError> {
    let entries: Vec<&BufferEntry> = buffer.entries().collect();
    jsonl::write_file(path, &entries)
}

/// Rebuilds a buffer from a dump, replaying pushes in file order.
pub fn load_buffer(path: &Path, config: &HarnessConfig) -> Result<ReplayBuffer, HarnessError> {
    let mut buffer = empty_buffer(config)?;
    for entry in jsonl::read_file::<BufferEntry>(path)? {
        buffer.push(entry)?;
    }
    Ok(buffer)
}
