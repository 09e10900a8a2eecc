use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{Backend, BackendError, BackendKind, GenerationRecord, GenerationRequest, ProbeStatus, TokenUsage};

pub const DEFAULT_HTTP_TIMEOUT_S: f64 = 120.0;

/// Client for OpenAI-compatible `/chat/completions` servers.
pub struct HttpBackend {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl HttpBackend {
    /// `endpoint` is the API base, e.g. `http://localhost:8000/v1`.
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            api_key: api_key.filter(|k| !k.is_empty()),
            agent,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn base(&self) -> &str {
        self.endpoint
            .strip_suffix("/chat/completions")
            .unwrap_or(&self.endpoint)
    }

    fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base())
    }

    fn auth(&self) -> Option<String> {
        self.api_key.as_ref().map(|k| format!("Bearer {k}"))
    }
}

fn transport(e: ureq::Error) -> BackendError {
    BackendError::Network(e.to_string())
}

impl Backend for HttpBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Http
    }

    fn generate(&self, request: &GenerationRequest<'_>) -> Result<GenerationRecord, BackendError> {
        let body = json!({
            "model": request.config.model_name,
            "messages": [
                {"role": "system", "content": request.prompt.system_text},
                {"role": "user", "content": request.prompt.user_text},
            ],
            "temperature": request.config.temperature,
            "max_tokens": request.config.max_tokens,
        });
        let started = Instant::now();
        let mut req = self.agent.post(&self.completions_url());
        if let Some(auth) = self.auth() {
            req = req.header("Authorization", &auth);
        }
        let mut response = req.send_json(&body).map_err(transport)?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let body = response.body_mut().read_to_string().unwrap_or_default();
            return Err(BackendError::HttpStatus { status, body });
        }
        let text = response.body_mut().read_to_string().map_err(transport)?;
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| BackendError::Protocol(format!("response body: {e}")))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Protocol("no message content in choices".into()))?;
        Ok(GenerationRecord {
            raw_text: content,
            latency_s: started.elapsed().as_secs_f64(),
            token_usage: parsed.usage.map(|u| TokenUsage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
            }),
        })
    }

    fn probe(&self) -> ProbeStatus {
        let url = format!("{}/models", self.base());
        let mut req = self.agent.get(&url);
        if let Some(auth) = self.auth() {
            req = req.header("Authorization", &auth);
        }
        match req.call() {
            Ok(resp) if resp.status().is_success() => ProbeStatus::healthy(format!("{url} answered {}", resp.status())),
            Ok(resp) => ProbeStatus::unhealthy(format!("{url} answered {}", resp.status())),
            Err(e) => ProbeStatus::unhealthy(format!("{url} unreachable: {e}")),
        }
    }
}
