use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{LlmError, Provider, ProviderReply, Request};

fn default_auth_header() -> String {
    "Authorization".into()
}

fn default_auth_prefix() -> String {
    "Bearer ".into()
}

/// Chat-completions endpoint settings. The credential is read from the
/// environment variable named by `api_key_env` at call time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpConfig {
    pub endpoint: String,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_auth_header")]
    pub auth_header: String,
    #[serde(default = "default_auth_prefix")]
    pub auth_prefix: String,
}

#[derive(Debug, Clone)]
pub struct HttpProvider {
    config: HttpConfig,
}

impl HttpProvider {
    pub fn new(config: HttpConfig) -> Self {
        Self { config }
    }
}

fn excerpt(body: &str) -> String {
    body.chars().take(500).collect()
}

/// Pulls text and usage out of a chat-completions response body.
pub(crate) fn parse_chat_response(body: &Value) -> Result<ProviderReply, LlmError> {
    let text = body["choices"][0]["message"]["content"]
        .as_str()
        .ok_or_else(|| LlmError::ProviderError {
            status: Some(200),
            body: format!("response without message content: {}", excerpt(&body.to_string())),
        })?
        .to_string();
    let usage = &body["usage"];
    Ok(ProviderReply {
        text,
        prompt_tokens: usage["prompt_tokens"].as_u64(),
        completion_tokens: usage["completion_tokens"].as_u64(),
    })
}

impl Provider for HttpProvider {
    fn name(&self) -> &str {
        "http"
    }

    fn complete(&self, request: &Request<'_>) -> Result<ProviderReply, LlmError> {
        let model = request.model;
        let timeout = Duration::from_secs_f64(model.timeout_secs);
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let body = json!({
            "model": model.name,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
            "temperature": model.temperature,
            "top_p": model.top_p,
            "max_tokens": model.max_tokens,
            "seed": request.seed,
        });
        let mut call = agent.post(&self.config.endpoint);
        if let Some(var) = &self.config.api_key_env {
            let key = std::env::var(var).map_err(|_| LlmError::ProviderError {
                status: Some(401),
                body: format!("environment variable {var} is not set"),
            })?;
            call = call.header(&self.config.auth_header, &format!("{}{key}", self.config.auth_prefix));
        }
        let mut response = call.send_json(&body).map_err(|e| match e {
            ureq::Error::Timeout(_) => LlmError::Timeout(model.timeout_secs),
            other => LlmError::ProviderError { status: None, body: other.to_string() },
        })?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::ProviderError { status: Some(status), body: e.to_string() })?;
        if !(200..300).contains(&status) {
            return Err(LlmError::ProviderError { status: Some(status), body: excerpt(&text) });
        }
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| LlmError::ProviderError { status: Some(status), body: format!("{e}: {}", excerpt(&text)) })?;
        parse_chat_response(&value)
    }
}
