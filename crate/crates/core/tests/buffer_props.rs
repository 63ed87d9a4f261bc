use backtrans_core::buffer::{BufferEntry, Direction, ReplayBuffer, DEFAULT_EPS};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scratch(rewards: &[f64]) -> (f64, f64) {
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn entry(direction: Direction, reward: f64) -> BufferEntry {
    BufferEntry::new(direction, "in", "out", reward, 0)
}

#[test]
fn incremental_stats_track_scratch_over_ten_thousand_operations() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut buffer = ReplayBuffer::new(97).unwrap();
    for op in 0..10_000 {
        let direction = if rng.random_bool(0.5) {
            Direction::Code2Doc
        } else {
            Direction::Doc2Code
        };
        let reward = match rng.random_range(0..4) {
            0 => 0.0,
            1 => 1.0,
            2 => 0.5 * rng.random::<f64>(),
            _ => rng.random::<f64>(),
        };
        buffer.push(entry(direction, reward)).unwrap();
        if op % 7 == 0 || op > 9_990 {
            for dir in Direction::BOTH {
                let resident: Vec<f64> = buffer
                    .entries()
                    .filter(|e| e.direction == dir)
                    .map(|e| e.reward)
                    .collect();
                match buffer.stats(dir) {
                    None => assert!(resident.is_empty()),
                    Some(s) => {
                        let (mean, std) = scratch(&resident);
                        assert_eq!(s.count, resident.len());
                        assert!((s.mean - mean).abs() < 1e-9, "op {op}");
                        assert!((s.std - std).abs() < 1e-9, "op {op}");
                    }
                }
            }
        }
    }
    assert_eq!(buffer.len(), 97);
}

#[test]
fn single_entry_and_all_equal_advantages_are_exactly_zero() {
    let mut buffer = ReplayBuffer::new(16).unwrap();
    buffer.push(entry(Direction::Doc2Code, 0.37)).unwrap();
    assert_eq!(
        buffer.advantage(&entry(Direction::Doc2Code, 0.37)).unwrap(),
        0.0
    );
    for _ in 0..20 {
        buffer.push(entry(Direction::Code2Doc, 0.1)).unwrap();
    }
    assert_eq!(buffer.stats(Direction::Code2Doc).unwrap().std, 0.0);
    assert_eq!(
        buffer.advantage(&entry(Direction::Code2Doc, 0.1)).unwrap(),
        0.0
    );
}

fn moments(buffer: &ReplayBuffer, dir: Direction) -> (f64, f64) {
    let advs: Vec<f64> = buffer
        .entries()
        .filter(|e| e.direction == dir)
        .map(|e| buffer.advantage(e).unwrap())
        .collect();
    scratch(&advs)
}

proptest! {
    #[test]
    fn advantages_are_standardized(rewards in prop::collection::vec(0.0f64..=1.0, 2..300)) {
        let distinct = rewards.iter().any(|r| *r != rewards[0]);
        prop_assume!(distinct);
        let (_, sigma) = scratch(&rewards);
        // The stabilizer caps achievable unit variance at sigma / (sigma + eps).
        prop_assume!(DEFAULT_EPS / (sigma + DEFAULT_EPS) < 1e-6);
        let mut buffer = ReplayBuffer::new(4096).unwrap();
        for r in &rewards {
            buffer.push(entry(Direction::Code2Doc, *r)).unwrap();
        }
        let (mean, std) = moments(&buffer, Direction::Code2Doc);
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!((std - 1.0).abs() < 1e-6);
    }

    #[test]
    fn grid_rewards_are_standardized(steps in prop::collection::vec(0u8..=8, 2..64)) {
        prop_assume!(steps.iter().any(|s| *s != steps[0]));
        let mut buffer = ReplayBuffer::new(64).unwrap();
        for s in &steps {
            buffer.push(entry(Direction::Doc2Code, f64::from(*s) / 8.0)).unwrap();
        }
        let (mean, std) = moments(&buffer, Direction::Doc2Code);
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!((std - 1.0).abs() < 1e-6);
    }

    #[test]
    fn eviction_is_fifo(capacity in 1usize..20, n in 0usize..60) {
        let mut buffer = ReplayBuffer::new(capacity).unwrap();
        for i in 0..n {
            let evicted = buffer.push(BufferEntry::new(Direction::Code2Doc, "in", &i.to_string(), 0.0, i as u64)).unwrap();
            match evicted {
                Some(e) => prop_assert_eq!(e.group_id, (i - capacity) as u64),
                None => prop_assert!(i < capacity),
            }
        }
        prop_assert_eq!(buffer.len(), n.min(capacity));
    }
}
