//! Bounded FIFO replay buffer with per-direction reward statistics.
//!
//! Rewards are normalized into advantages `(r - μ) / (σ + ε)` using the
//! population mean and standard deviation of the resident rewards of the same
//! direction. The running sums are compensated, and an exact multiset of
//! resident rewards is kept alongside them so that a direction holding a
//! single distinct value reports `σ = 0` and `μ` equal to that value exactly.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::rollout::RolloutGroup;

pub const DEFAULT_CAPACITY: usize = 4096;
pub const DEFAULT_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Code2Doc,
    Doc2Code,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Code2Doc, Direction::Doc2Code];

    fn index(self) -> usize {
        match self {
            Direction::Code2Doc => 0,
            Direction::Doc2Code => 1,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Code2Doc => "code2doc",
            Direction::Doc2Code => "doc2code",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferEntry {
    pub direction: Direction,
    pub input: String,
    pub output: String,
    pub reward: f64,
    pub group_id: u64,
}

impl BufferEntry {
    pub fn new(
        direction: Direction,
        input: &str,
        output: &str,
        reward: f64,
        group_id: u64,
    ) -> Self {
        Self {
            direction,
            input: input.into(),
            output: output.into(),
            reward,
            group_id,
        }
    }

    pub fn validate(&self) -> Result<(), BufferError> {
        if (0.0..=1.0).contains(&self.reward) {
            Ok(())
        } else {
            Err(BufferError::RewardOutOfRange(self.reward))
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BufferError {
    #[error("no {0} entries are resident")]
    EmptyDirection(Direction),
    #[error("requested {requested} entries but only {resident} are resident")]
    Underfull { requested: usize, resident: usize },
    #[error("reward {0} outside [0, 1]")]
    RewardOutOfRange(f64),
    #[error("buffer capacity must be positive")]
    ZeroCapacity,
}

/// Where normalization statistics come from when sampling minibatches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatsScope {
    /// Every resident entry of the direction.
    #[default]
    Buffer,
    /// Only the entries drawn into the minibatch.
    Batch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionStats {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl DirectionStats {
    pub fn advantage(&self, reward: f64, eps: f64) -> f64 {
        (reward - self.mean) / (self.std + eps)
    }
}

/// Neumaier-compensated sum that also supports removal.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if libm::fabs(self.sum) >= libm::fabs(x) {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Clone, Default)]
struct RunningStats {
    count: usize,
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
    /// Resident rewards keyed by bit pattern.
    values: BTreeMap<u64, usize>,
}

impl RunningStats {
    fn insert(&mut self, reward: f64) {
        self.count += 1;
        self.sum.add(reward);
        self.sum_sq.add(reward * reward);
        *self.values.entry(reward.to_bits()).or_insert(0) += 1;
    }

    fn remove(&mut self, reward: f64) {
        self.count -= 1;
        self.sum.add(-reward);
        self.sum_sq.add(-(reward * reward));
        let key = reward.to_bits();
        if let Some(n) = self.values.get_mut(&key) {
            *n -= 1;
            if *n == 0 {
                self.values.remove(&key);
            }
        }
        if self.count == 0 {
            *self = Self::default();
        }
    }

    fn snapshot(&self) -> Option<DirectionStats> {
        if self.count == 0 {
            return None;
        }
        if self.values.len() == 1 {
            let only = self
                .values
                .keys()
                .next()
                .map_or(0.0, |&bits| f64::from_bits(bits));
            return Some(DirectionStats {
                count: self.count,
                mean: only,
                std: 0.0,
            });
        }
        let n = self.count as f64;
        let mean = self.sum.value() / n;
        let var = (self.sum_sq.value() / n - mean * mean).max(0.0);
        Some(DirectionStats {
            count: self.count,
            mean,
            std: libm::sqrt(var),
        })
    }
}

/// Two-pass statistics over an explicit set of rewards.
pub fn stats_of(rewards: &[f64]) -> Option<DirectionStats> {
    let first = *rewards.first()?;
    let n = rewards.len() as f64;
    if rewards.iter().all(|r| r.to_bits() == first.to_bits()) {
        return Some(DirectionStats {
            count: rewards.len(),
            mean: first,
            std: 0.0,
        });
    }
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    Some(DirectionStats {
        count: rewards.len(),
        mean,
        std: libm::sqrt(var),
    })
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    eps: f64,
    scope: StatsScope,
    entries: VecDeque<BufferEntry>,
    stats: [RunningStats; 2],
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self, BufferError> {
        if capacity == 0 {
            return Err(BufferError::ZeroCapacity);
        }
        Ok(Self {
            capacity,
            eps: DEFAULT_EPS,
            scope: StatsScope::Buffer,
            entries: VecDeque::new(),
            stats: Default::default(),
        })
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_scope(mut self, scope: StatsScope) -> Self {
        self.scope = scope;
        self
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl ExactSizeIterator<Item = &BufferEntry> {
        self.entries.iter()
    }

    pub fn get(&self, index: usize) -> Option<&BufferEntry> {
        self.entries.get(index)
    }

    /// Appends `entry`, evicting and returning the oldest entry when full.
    pub fn push(&mut self, entry: BufferEntry) -> Result<Option<BufferEntry>, BufferError> {
        entry.validate()?;
        self.stats[entry.direction.index()].insert(entry.reward);
        self.entries.push_back(entry);
        if self.entries.len() > self.capacity {
            let evicted = self.entries.pop_front();
            if let Some(old) = &evicted {
                self.stats[old.direction.index()].remove(old.reward);
            }
            return Ok(evicted);
        }
        Ok(None)
    }

    /// Pushes every trajectory of `group` under `group_id`.
    pub fn push_group(
        &mut self,
        group: &RolloutGroup,
        group_id: u64,
    ) -> Result<usize, BufferError> {
        let entries = group.buffer_entries(group_id);
        let n = entries.len();
        for e in entries {
            self.push(e)?;
        }
        Ok(n)
    }

    pub fn stats(&self, direction: Direction) -> Option<DirectionStats> {
        self.stats[direction.index()].snapshot()
    }

    pub fn count(&self, direction: Direction) -> usize {
        self.stats[direction.index()].count
    }

    pub fn advantage(&self, entry: &BufferEntry) -> Result<f64, BufferError> {
        let stats = self
            .stats(entry.direction)
            .ok_or(BufferError::EmptyDirection(entry.direction))?;
        Ok(stats.advantage(entry.reward, self.eps))
    }

    /// Draws `size` distinct entries uniformly under `seed` and pairs each
    /// with its advantage.
    pub fn sample_minibatch(
        &self,
        size: usize,
        seed: u64,
    ) -> Result<Vec<(BufferEntry, f64)>, BufferError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_minibatch_with(size, &mut rng)
    }

    /// `size` distinct resident positions, uniformly drawn under `seed`.
    pub fn sample_indices(&self, size: usize, seed: u64) -> Result<Vec<usize>, BufferError> {
        self.sample_indices_with(size, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn sample_indices_with<R: rand::Rng + ?Sized>(
        &self,
        size: usize,
        rng: &mut R,
    ) -> Result<Vec<usize>, BufferError> {
        if size > self.len() {
            return Err(BufferError::Underfull {
                requested: size,
                resident: self.len(),
            });
        }
        Ok(rand::seq::index::sample(rng, self.len(), size).into_vec())
    }

    pub fn sample_minibatch_with<R: rand::Rng + ?Sized>(
        &self,
        size: usize,
        rng: &mut R,
    ) -> Result<Vec<(BufferEntry, f64)>, BufferError> {
        let picked: Vec<&BufferEntry> = self
            .sample_indices_with(size, rng)?
            .into_iter()
            .map(|i| &self.entries[i])
            .collect();
        let stats = match self.scope {
            StatsScope::Buffer => [
                self.stats(Direction::Code2Doc),
                self.stats(Direction::Doc2Code),
            ],
            StatsScope::Batch => Direction::BOTH.map(|dir| {
                let rewards: Vec<f64> = picked
                    .iter()
                    .filter(|e| e.direction == dir)
                    .map(|e| e.reward)
                    .collect();
                stats_of(&rewards)
            }),
        };
        picked
            .into_iter()
            .map(|e| {
                let s =
                    stats[e.direction.index()].ok_or(BufferError::EmptyDirection(e.direction))?;
                Ok((e.clone(), s.advantage(e.reward, self.eps)))
            })
            .collect()
    }
}

/// Drops groups in which every trajectory of both directions has reward 0.
pub fn dynamic_filter(groups: Vec<RolloutGroup>) -> Vec<RolloutGroup> {
    dynamic_filter_by(groups, |g| g)
}

/// [`dynamic_filter`] over records that carry a group.
pub fn dynamic_filter_by<T>(items: Vec<T>, group: impl Fn(&T) -> &RolloutGroup) -> Vec<T> {
    items
        .into_iter()
        .filter(|it| !group(it).all_zero())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn entry(direction: Direction, reward: f64) -> BufferEntry {
        BufferEntry::new(direction, "in", "out", reward, 0)
    }

    fn filled(rewards: &[f64]) -> ReplayBuffer {
        let mut buf = ReplayBuffer::new(16).unwrap();
        for &r in rewards {
            buf.push(entry(Direction::Code2Doc, r)).unwrap();
        }
        buf
    }

    #[test]
    fn push_and_evict() {
        let mut buf = ReplayBuffer::new(3).unwrap();
        assert!(buf.push(entry(Direction::Code2Doc, 0.1)).unwrap().is_none());
        assert_eq!(buf.len(), 1);
        buf.push(entry(Direction::Code2Doc, 0.2)).unwrap();
        buf.push(entry(Direction::Doc2Code, 0.3)).unwrap();
        let evicted = buf.push(entry(Direction::Code2Doc, 0.4)).unwrap().unwrap();
        assert_eq!(evicted.reward, 0.1);
        assert_eq!(buf.len(), 3);
        let s = buf.stats(Direction::Code2Doc).unwrap();
        assert_eq!(s.count, 2);
        assert!((s.mean - 0.3).abs() < 1e-15);
        assert!((s.std - 0.1).abs() < 1e-15);
    }

    #[test]
    fn three_reward_advantage() {
        let buf = filled(&[0.2, 0.4, 0.6]);
        let a = buf.advantage(&entry(Direction::Code2Doc, 0.2)).unwrap();
        assert!((a - (-1.224744)).abs() < 1e-6, "{a}");
    }

    #[test]
    fn equal_rewards_have_zero_advantage() {
        let buf = filled(&[0.3, 0.3, 0.3]);
        assert_eq!(
            buf.advantage(&entry(Direction::Code2Doc, 0.3)).unwrap(),
            0.0
        );
        let single = filled(&[0.7]);
        assert_eq!(
            single.advantage(&entry(Direction::Code2Doc, 0.7)).unwrap(),
            0.0
        );
    }

    #[test]
    fn empty_direction_errors() {
        let buf = filled(&[0.5]);
        assert_eq!(
            buf.advantage(&entry(Direction::Doc2Code, 0.5)),
            Err(BufferError::EmptyDirection(Direction::Doc2Code))
        );
    }

    #[test]
    fn rejects_out_of_range_rewards() {
        let mut buf = ReplayBuffer::new(2).unwrap();
        assert!(buf.push(entry(Direction::Code2Doc, 1.5)).is_err());
        assert!(buf.push(entry(Direction::Code2Doc, f64::NAN)).is_err());
        assert!(buf.is_empty());
        assert_eq!(ReplayBuffer::new(0).unwrap_err(), BufferError::ZeroCapacity);
    }

    #[test]
    fn minibatch_permutation_and_replay() {
        let buf = filled(&[0.0, 0.1, 0.2, 0.3, 0.4]);
        let all = buf.sample_minibatch(5, 1).unwrap();
        let mut rewards: Vec<f64> = all.iter().map(|(e, _)| e.reward).collect();
        rewards.sort_by(f64::total_cmp);
        assert_eq!(rewards, vec![0.0, 0.1, 0.2, 0.3, 0.4]);
        assert_eq!(
            buf.sample_minibatch(3, 42).unwrap(),
            buf.sample_minibatch(3, 42).unwrap()
        );
        assert_eq!(
            buf.sample_minibatch(6, 0),
            Err(BufferError::Underfull {
                requested: 6,
                resident: 5
            })
        );
    }

    #[test]
    fn batch_scope_uses_batch_stats() {
        let mut buf = filled(&[0.0, 1.0, 1.0, 1.0]).with_scope(StatsScope::Batch);
        buf.push(entry(Direction::Doc2Code, 0.5)).unwrap();
        let batch = buf.sample_minibatch(5, 3).unwrap();
        let d2c = batch
            .iter()
            .find(|(e, _)| e.direction == Direction::Doc2Code)
            .unwrap();
        assert_eq!(d2c.1, 0.0);
    }

    #[test]
    fn stats_of_matches_running() {
        let rewards = [0.9, 0.1, 0.5, 0.25];
        let buf = filled(&rewards);
        let a = buf.stats(Direction::Code2Doc).unwrap();
        let b = stats_of(&rewards).unwrap();
        assert!((a.mean - b.mean).abs() < 1e-15 && (a.std - b.std).abs() < 1e-15);
        assert!(stats_of(&[]).is_none());
    }
}
