//! Blocking HTTP transport speaking the chat-completion wire format.
//!
//! Request body: `{model, messages, temperature}`; the completion text is
//! taken from the first choice of the response. The bearer credential
//! comes from the `GEO_ENGINE_API_KEY` environment variable.

use serde::Deserialize;

use super::{ChatRequest, EngineTransport, TransportError, API_KEY_ENV};

pub struct HttpTransport {
    endpoint: String,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(endpoint: &str) -> Self {
        HttpTransport {
            endpoint: endpoint.to_string(),
            api_key: std::env::var(API_KEY_ENV).ok(),
        }
    }
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

impl EngineTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let mut builder = ureq::post(&self.endpoint);
        if let Some(key) = &self.api_key {
            builder = builder.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = builder
            .send_json(request)
            .map_err(|err| match err {
                ureq::Error::StatusCode(429) => {
                    TransportError::RateLimited("HTTP 429".to_string())
                }
                other => TransportError::Failed(other.to_string()),
            })?;
        let completion: Completion = response
            .body_mut()
            .read_json()
            .map_err(|err| TransportError::Failed(format!("bad completion body: {err}")))?;
        completion
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| TransportError::Failed("completion has no choices".to_string()))
    }

    fn cache_salt(&self) -> String {
        format!("live:{}", self.endpoint)
    }
}
