//! OpenAI-compatible chat-completions client.

use serde::{Deserialize, Serialize};

use super::{
    Backend, BackendCall, BackendConfig, BackendError, BackendReply, ConfigError, ReasoningEffort,
};
use crate::model::TokenUsage;

#[derive(Serialize)]
struct Message<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [Message<'a>; 2],
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    reasoning_effort: Option<ReasoningEffort>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    api_key: String,
    reasoning_effort: bool,
}

impl HttpBackend {
    /// Builds a client from `config`, reading the key from `config.api_key_env`.
    pub fn from_config(config: &BackendConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let api_key = std::env::var(&config.api_key_env)
            .map_err(|_| ConfigError::MissingApiKey(config.api_key_env.clone()))?;
        let endpoint = config.endpoint_url.as_deref().ok_or(ConfigError::MissingEndpoint)?;
        Ok(Self::new(endpoint, api_key, config))
    }

    pub fn new(endpoint: &str, api_key: impl Into<String>, config: &BackendConfig) -> Self {
        let endpoint = endpoint.trim_end_matches('/');
        let url = if endpoint.ends_with("/chat/completions") {
            endpoint.to_string()
        } else {
            format!("{endpoint}/chat/completions")
        };
        let agent = ureq::AgentBuilder::new()
            .timeout(config.request_timeout)
            .build();
        Self {
            agent,
            url,
            api_key: api_key.into(),
            reasoning_effort: config.supports_reasoning_effort,
        }
    }
}

fn classify(error: ureq::Error) -> BackendError {
    match error {
        ureq::Error::Status(code, response) => {
            let body = response.into_string().unwrap_or_default();
            match code {
                401 | 403 => BackendError::Auth(format!("HTTP {code}: {body}")),
                408 | 409 | 429 | 500..=599 => {
                    BackendError::Transport(format!("HTTP {code}: {body}"))
                }
                _ => BackendError::Fatal(format!("HTTP {code}: {body}")),
            }
        }
        ureq::Error::Transport(transport) => {
            let message = transport.to_string();
            if message.contains("timed out") {
                BackendError::Timeout
            } else {
                BackendError::Transport(message)
            }
        }
    }
}

impl Backend for HttpBackend {
    fn complete(&self, call: &BackendCall<'_>) -> Result<BackendReply, BackendError> {
        let body = ChatRequest {
            model: &call.request.model,
            messages: [
                Message {
                    role: "system",
                    content: &call.prompt.system,
                },
                Message {
                    role: "user",
                    content: &call.prompt.user,
                },
            ],
            temperature: call.request.temperature,
            reasoning_effort: call.request.reasoning_effort.filter(|_| self.reasoning_effort),
        };
        let response = self
            .agent
            .post(&self.url)
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(classify)?;
        let parsed: ChatResponse = response
            .into_json()
            .map_err(|e| BackendError::Transport(format!("decoding response: {e}")))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .unwrap_or_default();
        let usage = parsed
            .usage
            .map(|u| TokenUsage::new(u.prompt_tokens, u.completion_tokens))
            .unwrap_or_default();
        Ok(BackendReply { content, usage })
    }
}
