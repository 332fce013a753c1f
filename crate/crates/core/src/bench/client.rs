//! Endpoint configuration and the chat-completions HTTP adapter.

use std::io::BufRead;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RequestParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub retries: u32,
}

impl Default for RequestParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: 1024,
            timeout_secs: 60,
            retries: 3,
        }
    }
}

fn default_backoff() -> u64 {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEndpoint {
    /// Display name; also the cache-key model component.
    pub name: String,
    pub base_url: String,
    /// Model identifier sent on the wire; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Name of the environment variable holding the API key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(flatten)]
    pub params: RequestParams,
    /// Delay between attempts, growing linearly with the attempt number.
    #[serde(default = "default_backoff")]
    pub retry_backoff_ms: u64,
}

const SECRET_KEYS: [&str; 4] = ["api_key", "apikey", "key", "authorization"];

impl ModelEndpoint {
    pub fn new(name: impl Into<String>, base_url: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            base_url: base_url.into(),
            model: None,
            api_key_env: None,
            params: RequestParams::default(),
            retry_backoff_ms: default_backoff(),
        }
    }

    pub fn wire_model(&self) -> &str {
        self.model.as_deref().unwrap_or(&self.name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Config("endpoint name is empty".into()));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(Error::Config(format!(
                "endpoint {:?}: base_url must start with http:// or https://",
                self.name
            )));
        }
        if self.params.timeout_secs == 0 {
            return Err(Error::Config(format!(
                "endpoint {:?}: timeout must be positive",
                self.name
            )));
        }
        Ok(())
    }
}

/// Parses the endpoints file: one JSON object per line. Literal API keys are
/// refused; keys are only ever read from the named environment variable.
pub fn parse_endpoints<R: BufRead>(reader: R) -> Result<Vec<ModelEndpoint>> {
    let mut out: Vec<ModelEndpoint> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let record = i + 1;
        let line = line.map_err(|e| Error::Record {
            record,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Record {
            record,
            message: format!("malformed endpoint: {e}"),
        })?;
        if let Some(obj) = value.as_object() {
            if let Some(k) = obj.keys().find(|k| SECRET_KEYS.contains(&k.to_lowercase().as_str())) {
                return Err(Error::Record {
                    record,
                    message: format!(
                        "field {k:?} looks like a credential; put the key in an environment variable and name it in \"api_key_env\""
                    ),
                });
            }
        }
        let ep: ModelEndpoint = serde_json::from_value(value).map_err(|e| Error::Record {
            record,
            message: format!("malformed endpoint: {e}"),
        })?;
        ep.validate().map_err(|e| Error::Record {
            record,
            message: e.to_string(),
        })?;
        if out.iter().any(|o| o.name == ep.name) {
            return Err(Error::Record {
                record,
                message: format!("duplicate endpoint name {:?}", ep.name),
            });
        }
        out.push(ep);
    }
    Ok(out)
}

pub fn load_endpoints(path: impl AsRef<Path>) -> Result<Vec<ModelEndpoint>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_endpoints(std::io::BufReader::new(f))
}

/// One attempt's failure; retried by the caller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttemptError(pub String);

/// A chat-style text generation backend.
pub trait ChatClient: Sync {
    fn complete(&self, endpoint: &ModelEndpoint, prompt: &str) -> std::result::Result<String, AttemptError>;
}

/// `POST {base_url}/chat/completions` with a single user message, reading
/// `choices[0].message.content`.
#[derive(Debug, Default, Clone, Copy)]
pub struct ChatCompletionsClient;

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

pub fn completions_url(base_url: &str) -> String {
    format!("{}/chat/completions", base_url.trim_end_matches('/'))
}

pub fn request_body(endpoint: &ModelEndpoint, prompt: &str) -> serde_json::Value {
    serde_json::json!({
        "model": endpoint.wire_model(),
        "messages": [{"role": "user", "content": prompt}],
        "temperature": endpoint.params.temperature,
        "max_tokens": endpoint.params.max_tokens,
    })
}

impl ChatClient for ChatCompletionsClient {
    fn complete(&self, endpoint: &ModelEndpoint, prompt: &str) -> std::result::Result<String, AttemptError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(endpoint.params.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let mut req = agent
            .post(completions_url(&endpoint.base_url))
            .header("Content-Type", "application/json");
        if let Some(var) = &endpoint.api_key_env {
            let key = std::env::var(var)
                .map_err(|_| AttemptError(format!("environment variable {var} is not set")))?;
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(request_body(endpoint, prompt))
            .map_err(|e| AttemptError(format!("request failed: {e}")))?;
        let status = resp.status();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| AttemptError(format!("reading response: {e}")))?;
        if !status.is_success() {
            let snippet: String = body.chars().take(200).collect();
            return Err(AttemptError(format!("HTTP {}: {snippet}", status.as_u16())));
        }
        let parsed: CompletionResponse = serde_json::from_str(&body)
            .map_err(|e| AttemptError(format!("unexpected response shape: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| AttemptError("response has no message content".into()))
    }
}
