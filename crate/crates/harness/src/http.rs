//! Blocking client for chat-completions-compatible endpoints.

use std::thread;
use std::time::Duration;

use backtrans_core::backend::{
    backoff_schedule, ensure_cardinality, Backend, BackendError, GenRequest, GenResponse,
    RequestFormat,
};
use serde_json::{json, Value};
use ureq::Agent;

use crate::config::BackendConfig;

pub const ID: &str = "http";

pub struct HttpBackend {
    agent: Agent,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    retries: u32,
    backoff_base: Duration,
    supports_n: bool,
}

/// Why one attempt failed, and whether another attempt may help.
#[derive(Debug)]
enum Attempt {
    Retry(String),
    Fatal(BackendError),
}

impl HttpBackend {
    pub fn new(config: &BackendConfig) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty());
        Self {
            agent,
            endpoint: config.endpoint.trim_end_matches('/').to_string(),
            model: config.model.clone(),
            api_key,
            retries: config.retries,
            backoff_base: config.backoff_base(),
            supports_n: config.supports_n,
        }
    }

    pub fn request_body(&self, request: &GenRequest, n: usize) -> Value {
        let mut body = json!({
            "model": self.model,
            "n": n,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        match request.format {
            RequestFormat::Chat => {
                body["messages"] = json!([{ "role": "user", "content": request.prompt }]);
            }
            RequestFormat::Completion => body["prompt"] = json!(request.prompt),
        }
        body
    }

    fn url(&self, format: RequestFormat) -> String {
        match format {
            RequestFormat::Chat => format!("{}/chat/completions", self.endpoint),
            RequestFormat::Completion => format!("{}/completions", self.endpoint),
        }
    }

    fn attempt(&self, url: &str, body: &Value) -> Result<Vec<String>, Attempt> {
        let mut req = self.agent.post(url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = match req.send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::BadUri(u)) => {
                return Err(Attempt::Fatal(BackendError::InvalidRequest(format!(
                    "bad endpoint URL {u}"
                ))))
            }
            Err(e) => return Err(Attempt::Retry(e.to_string())),
        };
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            return Err(Attempt::Fatal(BackendError::Unavailable {
                attempts: 1,
                message: format!(
                    "HTTP {status}: {}",
                    text.chars().take(200).collect::<String>()
                ),
            }));
        }
        parse_choices(&text).map_err(Attempt::Fatal)
    }

    /// One logical call with retries. `n` is the sample count requested.
    fn call(&self, request: &GenRequest, n: usize) -> Result<Vec<String>, BackendError> {
        let url = self.url(request.format);
        let body = self.request_body(request, n);
        let delays = backoff_schedule(self.backoff_base, self.retries);
        let mut last = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                thread::sleep(delays[attempt as usize - 1]);
            }
            match self.attempt(&url, &body) {
                Ok(completions) => return Ok(completions),
                Err(Attempt::Retry(msg)) => last = msg,
                Err(Attempt::Fatal(BackendError::Unavailable { message, .. })) => {
                    return Err(BackendError::Unavailable {
                        attempts: attempt + 1,
                        message,
                    })
                }
                Err(Attempt::Fatal(e)) => return Err(e),
            }
        }
        Err(BackendError::Unavailable {
            attempts: self.retries + 1,
            message: last,
        })
    }
}

/// Extracts `choices[i].message.content` or `choices[i].text`, in order.
pub fn parse_choices(text: &str) -> Result<Vec<String>, BackendError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| BackendError::MalformedResponse(format!("undecodable payload: {e}")))?;
    let choices = value
        .get("choices")
        .and_then(Value::as_array)
        .ok_or_else(|| BackendError::MalformedResponse("missing `choices` array".into()))?;
    choices
        .iter()
        .enumerate()
        .map(|(i, c)| {
            c.pointer("/message/content")
                .or_else(|| c.get("text"))
                .and_then(Value::as_str)
                .map(str::to_owned)
                .ok_or_else(|| BackendError::MalformedResponse(format!("choice {i} has no text")))
        })
        .collect()
}

impl Backend for HttpBackend {
    fn id(&self) -> &str {
        ID
    }

    fn generate(&self, request: &GenRequest) -> Result<GenResponse, BackendError> {
        request.validate()?;
        let completions = if self.supports_n || request.num_samples == 1 {
            self.call(request, request.num_samples)?
        } else {
            let mut all = Vec::with_capacity(request.num_samples);
            for _ in 0..request.num_samples {
                let one = self.call(request, 1)?;
                if one.len() != 1 {
                    return Err(BackendError::MalformedResponse(format!(
                        "expected 1 completion, got {}",
                        one.len()
                    )));
                }
                all.extend(one);
            }
            all
        };
        let response = GenResponse {
            completions,
            backend_id: ID.into(),
        };
        ensure_cardinality(&response, request.num_samples)?;
        Ok(response)
    }
}
