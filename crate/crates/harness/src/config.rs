//! Run configuration: built-in defaults, overridden by a TOML file, overridden
//! by `key=value` flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use backtrans_core::backend::{DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE};
use backtrans_core::buffer::{StatsScope, DEFAULT_CAPACITY, DEFAULT_EPS};
use backtrans_core::optim::{EXPORT_LEARNING_RATE, TOY_LEARNING_RATE};
use backtrans_core::rollout::{RolloutConfig, DEFAULT_K_SAMPLES};
use backtrans_core::similarity::SimilarityWeights;
use backtrans_core::toyworld::ToyConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Base URL; `/chat/completions` or `/completions` is appended.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub retries: u32,
    pub backoff_base_ms: u64,
    /// When false, `n` samples are fetched with `n` separate calls.
    pub supports_n: bool,
    pub fixtures: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            endpoint: "http://127.0.0.1:8000/v1".into(),
            model: "default".into(),
            api_key_env: "BACKTRANS_API_KEY".into(),
            timeout_secs: 120,
            retries: 3,
            backoff_base_ms: 500,
            supports_n: true,
            fixtures: None,
        }
    }
}

impl BackendConfig {
    pub fn backoff_base(&self) -> Duration {
        Duration::from_millis(self.backoff_base_ms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsConfig {
    pub token: f64,
    pub control: f64,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        let w = SimilarityWeights::default();
        Self {
            token: w.token(),
            control: w.control(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub k_samples: usize,
    pub max_response_tokens: u32,
    pub batch_size: usize,
    pub minibatch_size: usize,
    /// Step size of the toy policy.
    pub learning_rate: f64,
    /// Step size recorded in export metadata for external trainers.
    pub export_learning_rate: f64,
    pub kl_beta: f64,
    pub buffer_capacity: usize,
    pub eps_std: f64,
    pub stats_scope: StatsScope,
    pub temp_stage1: f64,
    pub temp_stage2: f64,
    /// Re-snapshot the KL reference every this many toy steps; 0 keeps it frozen.
    pub reference_refresh_steps: usize,
    pub seed: u64,
    pub sim_weights: WeightsConfig,
    pub backend: BackendConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            k_samples: DEFAULT_K_SAMPLES,
            max_response_tokens: DEFAULT_MAX_TOKENS,
            batch_size: 64,
            minibatch_size: 32,
            learning_rate: TOY_LEARNING_RATE,
            export_learning_rate: EXPORT_LEARNING_RATE,
            kl_beta: 0.0,
            buffer_capacity: DEFAULT_CAPACITY,
            eps_std: DEFAULT_EPS,
            stats_scope: StatsScope::Buffer,
            temp_stage1: DEFAULT_TEMPERATURE,
            temp_stage2: DEFAULT_TEMPERATURE,
            reference_refresh_steps: 0,
            seed: 0,
            sim_weights: WeightsConfig::default(),
            backend: BackendConfig::default(),
        }
    }
}

fn merge(base: &mut Table, layer: Table) {
    for (key, value) in layer {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(dst)), Value::Table(src)) => merge(dst, src),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

/// Parses `a.b=value` into a nested table. The value is read as TOML and
/// falls back to a plain string.
pub fn parse_override(assignment: &str) -> Result<Table, HarnessError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| HarnessError::Usage(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(HarnessError::Usage(format!(
            "override `{assignment}` has an empty key"
        )));
    }
    let raw = raw.trim();
    let value = toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.into()));
    let mut table = Table::new();
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().unwrap_or(key);
    let mut cursor = &mut table;
    for part in parts {
        cursor = match cursor
            .entry(part)
            .or_insert_with(|| Value::Table(Table::new()))
        {
            Value::Table(t) => t,
            _ => unreachable!("fresh entries are tables"),
        };
    }
    cursor.insert(leaf.into(), value);
    Ok(table)
}

impl HarnessConfig {
    /// Defaults, then `file` (if any), then each override in order.
    pub fn layered(file: Option<&Path>, overrides: &[Table]) -> Result<Self, HarnessError> {
        let mut table =
            Table::try_from(Self::default()).map_err(|e| HarnessError::Config(e.to_string()))?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
            let layer: Table = toml::from_str(&text)
                .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
            merge(&mut table, layer);
        }
        for layer in overrides {
            merge(&mut table, layer.clone());
        }
        let config: Self = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.into()));
        if self.k_samples == 0 {
            return bad("k_samples must be at least 1");
        }
        if self.max_response_tokens == 0 {
            return bad("max_response_tokens must be at least 1");
        }
        if self.batch_size == 0 || self.minibatch_size == 0 {
            return bad("batch sizes must be at least 1");
        }
        if self.buffer_capacity == 0 {
            return bad("buffer_capacity must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(self.kl_beta.is_finite() && self.kl_beta >= 0.0) {
            return bad("kl_beta must be finite and non-negative");
        }
        if !(self.eps_std.is_finite() && self.eps_std > 0.0) {
            return bad("eps_std must be positive");
        }
        if !(self.temp_stage1 >= 0.0 && self.temp_stage2 >= 0.0) {
            return bad("temperatures must be non-negative");
        }
        self.weights()?;
        Ok(())
    }

    pub fn weights(&self) -> Result<SimilarityWeights, HarnessError> {
        Ok(SimilarityWeights::new(
            self.sim_weights.token,
            self.sim_weights.control,
        )?)
    }

    pub fn rollout_config(&self) -> Result<RolloutConfig, HarnessError> {
        Ok(RolloutConfig {
            temp_stage1: self.temp_stage1,
            temp_stage2: self.temp_stage2,
            max_tokens_stage1: self.max_response_tokens,
            max_tokens_stage2: self.max_response_tokens,
            weights: self.weights()?,
            ..RolloutConfig::default()
        })
    }

    pub fn toy_config(&self) -> Result<ToyConfig, HarnessError> {
        Ok(ToyConfig {
            k_samples: self.k_samples,
            learning_rate: self.learning_rate,
            kl_beta: self.kl_beta,
            minibatch_size: self.minibatch_size,
            buffer_capacity: self.buffer_capacity,
            eps_std: self.eps_std,
            stats_scope: self.stats_scope,
            weights: self.weights()?,
            reference_refresh_steps: self.reference_refresh_steps,
        })
    }
}
