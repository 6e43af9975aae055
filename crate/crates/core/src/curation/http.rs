//! Blocking HTTP clients for a judge model and a sentence embedder.
//!
//! Judge wire format: `POST {endpoint}` with
//! `{"model", "task", "prompt", "images": [base64 PNG, ...]}`, answered by
//! `{"text": "..."}`. The embedder posts `{"model", "text"}` and expects
//! `{"embedding": [f64, ...]}`. The key, when set, goes in a bearer header.

use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use ureq::Agent;

use crate::evaluation::{Embedder, EvalError};

use super::client::{TransportError, VlmClient, VlmRequest, VlmTask};

/// Environment variable holding the API key for both clients.
pub const API_KEY_ENV: &str = "PATCHFORGE_API_KEY";

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    task: VlmTask,
    prompt: &'a str,
    images: Vec<String>,
}

#[derive(Deserialize)]
struct WireReply {
    text: String,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    text: &'a str,
}

#[derive(Deserialize)]
struct EmbedReply {
    embedding: Vec<f64>,
}

fn agent(timeout: Duration) -> Agent {
    Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

fn post<B: Serialize, R: serde::de::DeserializeOwned>(
    agent: &Agent,
    endpoint: &str,
    api_key: Option<&str>,
    body: &B,
) -> Result<R, TransportError> {
    let mut req = agent.post(endpoint);
    if let Some(key) = api_key {
        req = req.header("Authorization", &format!("Bearer {key}"));
    }
    let mut resp = req
        .send_json(body)
        .map_err(|e| TransportError::retryable(e.to_string()))?;
    let status = resp.status().as_u16();
    if status != 200 {
        let msg = format!("HTTP {status} from {endpoint}");
        return Err(if status == 429 || status >= 500 {
            TransportError::retryable(msg)
        } else {
            TransportError::fatal(msg)
        });
    }
    resp.body_mut()
        .read_json::<R>()
        .map_err(|e| TransportError::fatal(format!("bad reply body: {e}")))
}

pub struct HttpVlmClient {
    endpoint: String,
    api_key: Option<String>,
    agent: Agent,
}

impl HttpVlmClient {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key,
            agent: agent(timeout),
        }
    }

    /// Reads the key from [`API_KEY_ENV`].
    pub fn from_env(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self::new(
            endpoint,
            std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            timeout,
        )
    }
}

impl VlmClient for HttpVlmClient {
    fn complete(&self, req: &VlmRequest) -> Result<String, TransportError> {
        let b64 = base64::engine::general_purpose::STANDARD;
        let body = WireRequest {
            model: &req.model,
            task: req.task,
            prompt: &req.prompt,
            images: req.images.iter().map(|i| b64.encode(i)).collect(),
        };
        let reply: WireReply = post(&self.agent, &self.endpoint, self.api_key.as_deref(), &body)?;
        Ok(reply.text)
    }
}

pub struct HttpEmbedder {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    agent: Agent,
}

impl HttpEmbedder {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            agent: agent(timeout),
        }
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, EvalError> {
        let body = EmbedRequest {
            model: &self.model,
            text,
        };
        let reply: EmbedReply = post(&self.agent, &self.endpoint, self.api_key.as_deref(), &body)
            .map_err(|e| EvalError::Embedder(e.message))?;
        Ok(reply.embedding)
    }
}
