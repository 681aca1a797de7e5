//! Minimal chat-completion client for question-decomposition generation.
//! Transport only; the model's behavior is out of scope. The request and
//! response follow the common chat-completion JSON shape:
//! `{"model": ..., "messages": [{"role", "content"}]}` in,
//! `{"choices": [{"message": {"content": ...}}]}` out.

use std::time::Duration;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct EndpointConfig {
    /// Full URL of the chat-completion endpoint.
    pub url: String,
    pub model: String,
    /// Name of the environment variable holding the API key. When the
    /// variable is unset, the request carries no Authorization header
    /// (local stub endpoints).
    pub api_key_env: String,
    pub timeout_secs: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            url: "http://127.0.0.1:8080/v1/chat/completions".into(),
            model: "gpt-3.5-turbo".into(),
            api_key_env: "QPL_API_KEY".into(),
            timeout_secs: 60,
        }
    }
}

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("response contains no `#k = ...` steps")]
    MalformedResponse,
}

/// The split decomposition steps plus the raw response body for audit.
#[derive(Debug, Clone, PartialEq)]
pub struct QdResponse {
    pub steps: Vec<String>,
    pub raw: String,
}

/// Send the prompt and split the completion into `#k = ...` steps.
pub fn generate_qd(prompt: &str, config: &EndpointConfig) -> Result<QdResponse, ChatError> {
    let mut request = ureq::post(&config.url)
        .timeout(Duration::from_secs(config.timeout_secs))
        .set("Content-Type", "application/json");
    if let Ok(key) = std::env::var(&config.api_key_env) {
        if !key.is_empty() {
            request = request.set("Authorization", &format!("Bearer {key}"));
        }
    }
    let body = json!({
        "model": config.model,
        "messages": [{"role": "user", "content": prompt}],
    });
    let response = request
        .send_json(body)
        .map_err(|e| ChatError::Transport(e.to_string()))?;
    let raw = response
        .into_string()
        .map_err(|e| ChatError::Transport(e.to_string()))?;
    let parsed: serde_json::Value =
        serde_json::from_str(&raw).map_err(|e| ChatError::Transport(format!("bad JSON: {e}")))?;
    let content = parsed["choices"][0]["message"]["content"]
        .as_str()
        .ok_or(ChatError::MalformedResponse)?;
    let steps = split_qd_steps(content);
    if steps.is_empty() {
        return Err(ChatError::MalformedResponse);
    }
    Ok(QdResponse { steps, raw })
}

/// Split free text into `#k = ...` steps. A step starts at a line opening
/// with `#<digits> =`; later lines without a marker continue the previous
/// step. Inner whitespace is collapsed.
pub fn split_qd_steps(text: &str) -> Vec<String> {
    let mut steps: Vec<String> = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if is_step_start(trimmed) {
            steps.push(trimmed.to_string());
        } else if !trimmed.is_empty() {
            if let Some(last) = steps.last_mut() {
                last.push(' ');
                last.push_str(trimmed);
            }
        }
    }
    steps
        .into_iter()
        .map(|s| s.split_whitespace().collect::<Vec<_>>().join(" "))
        .collect()
}

fn is_step_start(line: &str) -> bool {
    let Some(rest) = line.strip_prefix('#') else {
        return false;
    };
    let digits = rest.chars().take_while(|c| c.is_ascii_digit()).count();
    digits > 0 && rest[digits..].trim_start().starts_with('=')
}
