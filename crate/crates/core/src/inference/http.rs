//! OpenAI-compatible chat-completions client (blocking).

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, Completion, CompletionRequest};

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Debug, Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    #[serde(default)]
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ChatChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

pub struct HttpBackend {
    agent: ureq::Agent,
    endpoint_url: String,
    model_id: String,
    temperature: f64,
    max_output_tokens: u32,
    bearer_token: Option<String>,
}

impl HttpBackend {
    /// `endpoint_url` is the full chat-completions URL.
    pub fn new(
        endpoint_url: impl Into<String>,
        model_id: impl Into<String>,
        temperature: f64,
        max_output_tokens: u32,
        timeout: Duration,
        bearer_token: Option<String>,
    ) -> HttpBackend {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend {
            agent,
            endpoint_url: endpoint_url.into(),
            model_id: model_id.into(),
            temperature,
            max_output_tokens,
            bearer_token,
        }
    }
}

impl Backend for HttpBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn complete(&self, req: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        let body = ChatRequest {
            model: &self.model_id,
            messages: [ChatMessage {
                role: "user",
                content: req.prompt,
            }],
            temperature: self.temperature,
            max_tokens: self.max_output_tokens,
        };
        let mut call = self.agent.post(&self.endpoint_url);
        if let Some(token) = &self.bearer_token {
            call = call.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = call.send_json(&body).map_err(|e| match e {
            ureq::Error::BadUri(_) => BackendError::Fatal(e.to_string()),
            other => BackendError::Transient(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(BackendError::Transient(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            return Err(BackendError::Fatal(format!("HTTP {status}")));
        }
        let parsed: ChatResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Fatal(format!("bad response body: {e}")))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::Fatal("response has no choices".into()))?;
        Ok(Completion {
            text: choice.message.content.unwrap_or_default(),
            finish_reason: choice.finish_reason.unwrap_or_else(|| "unknown".into()),
            simulated_latency_ms: None,
        })
    }
}
