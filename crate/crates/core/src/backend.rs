//! The generation interface used for both sampling stages, and a scripted mock.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::hash::Hasher;
use core::time::Duration;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_TOKENS: u32 = 1500;
pub const DEFAULT_TEMPERATURE: f64 = 1.0;

/// How a prompt is delivered to a completion endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestFormat {
    /// `messages: [{role: "user", content: prompt}]`
    #[default]
    Chat,
    /// `prompt: prompt`
    Completion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenRequest {
    pub prompt: String,
    pub num_samples: usize,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default)]
    pub format: RequestFormat,
}

impl GenRequest {
    pub fn new(prompt: impl Into<String>, num_samples: usize) -> Self {
        Self {
            prompt: prompt.into(),
            num_samples,
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            format: RequestFormat::Chat,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn with_format(mut self, format: RequestFormat) -> Self {
        self.format = format;
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.num_samples == 0 {
            return Err(BackendError::InvalidRequest(
                "num_samples must be positive".into(),
            ));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest(
                "max_tokens must be positive".into(),
            ));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(BackendError::InvalidRequest(format!(
                "temperature must be a non-negative number, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenResponse {
    pub completions: Vec<String>,
    pub backend_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("backend unavailable after {attempts} attempt(s): {message}")]
    Unavailable { attempts: u32, message: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("no scripted completions for prompt hash {0:016x}")]
    FixtureMiss(u64),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

/// A source of completions for a prompt. Implementations must be callable
/// from several workers at once.
pub trait Backend: Sync {
    fn id(&self) -> &str;

    /// Returns exactly `request.num_samples` completions or an error.
    fn generate(&self, request: &GenRequest) -> Result<GenResponse, BackendError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn generate(&self, request: &GenRequest) -> Result<GenResponse, BackendError> {
        (**self).generate(request)
    }
}

/// Fails with `MalformedResponse` unless `response` carries `expected` completions.
pub fn ensure_cardinality(response: &GenResponse, expected: usize) -> Result<(), BackendError> {
    if response.completions.len() == expected {
        Ok(())
    } else {
        Err(BackendError::MalformedResponse(format!(
            "expected {expected} completion(s), got {}",
            response.completions.len()
        )))
    }
}

/// 64-bit FNV-1a of the prompt bytes; the key of mock fixtures.
pub fn prompt_hash(prompt: &str) -> u64 {
    let mut hasher = FnvHasher::default();
    hasher.write(prompt.as_bytes());
    hasher.finish()
}

pub fn hash_hex(hash: u64) -> String {
    format!("{hash:016x}")
}

/// Delays between attempts: `base, 2·base, 4·base, ...`, one per retry.
pub fn backoff_schedule(base: Duration, retries: u32) -> Vec<Duration> {
    (0..retries)
        .map(|i| base.saturating_mul(1u32.checked_shl(i).unwrap_or(u32::MAX)))
        .collect()
}

/// Replays scripted completions keyed by prompt hash, cycling through the
/// script when more samples are requested than were scripted.
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    fixtures: BTreeMap<u64, Vec<String>>,
}

impl MockBackend {
    pub const ID: &'static str = "mock";

    pub fn new() -> Self {
        Self::default()
    }

    pub fn script(&mut self, prompt: &str, completions: Vec<String>) {
        self.fixtures.insert(prompt_hash(prompt), completions);
    }

    pub fn script_hash(&mut self, hash: u64, completions: Vec<String>) {
        self.fixtures.insert(hash, completions);
    }

    /// Builds a mock from `(hex hash, completions)` pairs.
    pub fn from_hex_entries<I>(entries: I) -> Result<Self, BackendError>
    where
        I: IntoIterator<Item = (String, Vec<String>)>,
    {
        let mut mock = Self::new();
        for (key, completions) in entries {
            let hash = u64::from_str_radix(key.trim_start_matches("0x"), 16).map_err(|_| {
                BackendError::InvalidRequest(format!("fixture key `{key}` is not a hex hash"))
            })?;
            mock.script_hash(hash, completions);
        }
        Ok(mock)
    }

    pub fn len(&self) -> usize {
        self.fixtures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures.is_empty()
    }
}

impl Backend for MockBackend {
    fn id(&self) -> &str {
        Self::ID
    }

    fn generate(&self, request: &GenRequest) -> Result<GenResponse, BackendError> {
        request.validate()?;
        let hash = prompt_hash(&request.prompt);
        let script = self
            .fixtures
            .get(&hash)
            .filter(|s| !s.is_empty())
            .ok_or(BackendError::FixtureMiss(hash))?;
        let completions = script
            .iter()
            .cycle()
            .take(request.num_samples)
            .cloned()
            .collect();
        Ok(GenResponse {
            completions,
            backend_id: Self::ID.into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| String::from(*s)).collect()
    }

    #[test]
    fn fnv1a_reference_values() {
        assert_eq!(prompt_hash(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(prompt_hash("a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(hash_hex(prompt_hash("a")), "af63dc4c8601ec8c");
    }

    #[test]
    fn mock_returns_script_in_order() {
        let mut mock = MockBackend::new();
        mock.script("p", strings(&["A", "B"]));
        let resp = mock.generate(&GenRequest::new("p", 2)).unwrap();
        assert_eq!(resp.completions, strings(&["A", "B"]));
        assert_eq!(resp.backend_id, "mock");
    }

    #[test]
    fn mock_cycles_short_scripts() {
        let mut mock = MockBackend::new();
        mock.script("p", strings(&["A"]));
        let resp = mock.generate(&GenRequest::new("p", 3)).unwrap();
        assert_eq!(resp.completions, strings(&["A", "A", "A"]));
    }

    #[test]
    fn mock_miss_and_bad_requests() {
        let mock = MockBackend::new();
        assert_eq!(
            mock.generate(&GenRequest::new("q", 1)),
            Err(BackendError::FixtureMiss(prompt_hash("q")))
        );
        assert!(matches!(
            mock.generate(&GenRequest::new("q", 0)),
            Err(BackendError::InvalidRequest(_))
        ));
        assert!(GenRequest::new("q", 1)
            .with_temperature(-1.0)
            .validate()
            .is_err());
    }

    #[test]
    fn hex_entries() {
        let mock =
            MockBackend::from_hex_entries(vec![(hash_hex(prompt_hash("p")), strings(&["x"]))])
                .unwrap();
        assert_eq!(
            mock.generate(&GenRequest::new("p", 1)).unwrap().completions,
            strings(&["x"])
        );
        assert!(MockBackend::from_hex_entries(vec![("zz".into(), vec![])]).is_err());
    }

    #[test]
    fn doubling_backoff() {
        let s = backoff_schedule(Duration::from_millis(10), 4);
        assert_eq!(
            s,
            vec![10, 20, 40, 80]
                .into_iter()
                .map(Duration::from_millis)
                .collect::<Vec<_>>()
        );
        assert!(backoff_schedule(Duration::from_millis(10), 0).is_empty());
    }

    #[test]
    fn defaults_follow_training_setup() {
        let r = GenRequest::new("p", 8);
        assert_eq!(r.max_tokens, 1500);
        assert_eq!(r.temperature, 1.0);
    }

    #[test]
    fn cardinality_check() {
        let resp = GenResponse {
            completions: strings(&["a"]),
            backend_id: "x".into(),
        };
        assert!(ensure_cardinality(&resp, 1).is_ok());
        assert!(matches!(
            ensure_cardinality(&resp, 2),
            Err(BackendError::MalformedResponse(_))
        ));
    }
}
