//! Chat-completions backend. The API key is read from `TSC_LLM_API_KEY` at
//! construction and is never written anywhere.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::parse::parse_tool_call;
use super::prompt::{build_messages, ChatMessage};
use super::{BackendError, BackendMessage, BackendRequest, DecisionBackend};

pub const API_KEY_ENV: &str = "TSC_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    pub timeout_s: u64,
    /// Extra attempts after a transport failure or a 429/5xx answer.
    pub retries: u32,
    /// Dot path to the reply text inside the response body.
    pub content_path: String,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o-mini".into(),
            timeout_s: 60,
            retries: 2,
            content_path: "choices.0.message.content".into(),
        }
    }
}

fn lookup<'a>(body: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').filter(|s| !s.is_empty()).try_fold(body, |v, key| match key.parse::<usize>() {
        Ok(i) if v.is_array() => v.get(i),
        _ => v.get(key),
    })
}

/// Turns a response body into one backend message. Structured tool calls
/// win over text; text holding a `{"tool": ...}` object counts as a call
/// unless it also carries an action.
pub fn message_from_response(body: &Value, content_path: &str) -> Result<BackendMessage, BackendError> {
    let message = lookup(body, "choices.0.message");
    let call = message.and_then(|m| {
        m.get("tool_calls")
            .and_then(|c| c.get(0))
            .and_then(|c| c.get("function"))
            .or_else(|| m.get("function_call"))
    });
    if let Some(f) = call {
        let name = f["name"]
            .as_str()
            .ok_or_else(|| BackendError::Protocol(format!("tool call without a name: {f}")))?;
        let args = match &f["arguments"] {
            Value::String(s) if s.trim().is_empty() => json!({}),
            Value::String(s) => serde_json::from_str(s)
                .map_err(|e| BackendError::Protocol(format!("tool call arguments are not JSON: {e}")))?,
            Value::Null => json!({}),
            other => other.clone(),
        };
        return Ok(BackendMessage::call(name, args));
    }
    let text = lookup(body, content_path)
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::Protocol(format!("no text at {content_path}")))?;
    if !text.contains("\"action\"") {
        if let Some((tool, args)) = parse_tool_call(text) {
            return Ok(BackendMessage::call(&tool, args));
        }
    }
    Ok(BackendMessage::text(text))
}

/// One POST with retries. Returns the parsed response body.
pub fn llm_chat_call(
    client: &reqwest::blocking::Client,
    config: &LlmConfig,
    api_key: &str,
    messages: &[ChatMessage],
) -> Result<Value, BackendError> {
    let body = json!({
        "model": config.model,
        "messages": messages,
        "temperature": 0,
    });
    let mut last = String::new();
    for _ in 0..=config.retries {
        let sent = client.post(&config.endpoint).bearer_auth(api_key).json(&body).send();
        match sent {
            Err(e) => last = e.to_string(),
            Ok(resp) => {
                let status = resp.status();
                if status.is_success() {
                    return resp
                        .json::<Value>()
                        .map_err(|e| BackendError::Protocol(format!("response is not JSON: {e}")));
                }
                last = format!("HTTP {status}");
                if !(status.is_server_error() || status.as_u16() == 429) {
                    return Err(BackendError::Transport(last));
                }
            }
        }
    }
    Err(BackendError::Transport(last))
}

pub struct LlmBackend {
    config: LlmConfig,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl std::fmt::Debug for LlmBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmBackend").field("config", &self.config).finish_non_exhaustive()
    }
}

impl LlmBackend {
    /// Fails when `TSC_LLM_API_KEY` is unset or empty.
    pub fn from_env(config: LlmConfig) -> Result<LlmBackend, String> {
        let key = std::env::var(API_KEY_ENV).unwrap_or_default();
        if key.trim().is_empty() {
            return Err(format!("{API_KEY_ENV} is not set"));
        }
        LlmBackend::with_key(config, key)
    }

    pub fn with_key(config: LlmConfig, api_key: String) -> Result<LlmBackend, String> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_s))
            .build()
            .map_err(|e| format!("http client: {e}"))?;
        Ok(LlmBackend { config, api_key, client })
    }
}

impl DecisionBackend for LlmBackend {
    fn kind(&self) -> String {
        format!("llm:{}", self.config.model)
    }

    fn respond(&mut self, request: &BackendRequest<'_>) -> Result<BackendMessage, BackendError> {
        let messages = build_messages(request);
        let body = llm_chat_call(&self.client, &self.config, &self.api_key, &messages)?;
        message_from_response(&body, &self.config.content_path)
    }
}
