use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::warn;

use super::CurationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VlmTask {
    Filter,
    LocalExplanation,
    GlobalExplanation,
}

/// One judge call: a prompt plus ordered PNG attachments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VlmRequest {
    pub task: VlmTask,
    pub model: String,
    pub prompt: String,
    pub images: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{message}")]
pub struct TransportError {
    pub message: String,
    pub retryable: bool,
}

impl TransportError {
    pub fn retryable(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            retryable: true,
        }
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            retryable: false,
        }
    }
}

pub trait VlmClient: Send + Sync {
    fn complete(&self, req: &VlmRequest) -> Result<String, TransportError>;
}

impl<C: VlmClient + ?Sized> VlmClient for &C {
    fn complete(&self, req: &VlmRequest) -> Result<String, TransportError> {
        (**self).complete(req)
    }
}

impl<C: VlmClient + ?Sized> VlmClient for Arc<C> {
    fn complete(&self, req: &VlmRequest) -> Result<String, TransportError> {
        (**self).complete(req)
    }
}

/// Bounded retries with exponential backoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetryPolicy {
    pub attempts: u32,
    /// Delay before the second attempt; doubled for each further attempt.
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay_ms: 250,
        }
    }
}

impl RetryPolicy {
    pub fn delay_before(&self, attempt: u32) -> Duration {
        if attempt == 0 {
            return Duration::ZERO;
        }
        Duration::from_millis(
            self.base_delay_ms
                .saturating_mul(1u64 << (attempt - 1).min(20)),
        )
    }
}

pub fn call_with_retry(
    client: &dyn VlmClient,
    req: &VlmRequest,
    policy: &RetryPolicy,
) -> Result<String, CurationError> {
    let attempts = policy.attempts.max(1);
    let mut last = String::new();
    for attempt in 0..attempts {
        std::thread::sleep(policy.delay_before(attempt));
        match client.complete(req) {
            Ok(text) => return Ok(text),
            Err(e) if e.retryable => {
                warn!(task = ?req.task, attempt = attempt + 1, error = %e.message, "client call failed");
                last = e.message;
            }
            Err(e) => {
                return Err(CurationError::Transport {
                    attempts: attempt + 1,
                    message: e.message,
                })
            }
        }
    }
    Err(CurationError::Transport {
        attempts,
        message: last,
    })
}

/// Stable hash of a request: task, model, prompt and attachment digests.
pub fn request_key(req: &VlmRequest) -> String {
    let mut h = Sha256::new();
    let task = serde_json::to_string(&req.task).expect("task serializes");
    for part in [task.as_bytes(), req.model.as_bytes(), req.prompt.as_bytes()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    for img in &req.images {
        h.update((img.len() as u64).to_le_bytes());
        h.update(Sha256::digest(img));
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

type Responder = dyn Fn(&VlmRequest) -> Result<String, TransportError> + Send + Sync;

/// Scripted client for tests and dry runs.
pub struct MockVlmClient {
    respond: Box<Responder>,
    calls: AtomicUsize,
}

impl MockVlmClient {
    pub fn from_fn(
        f: impl Fn(&VlmRequest) -> Result<String, TransportError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            respond: Box::new(f),
            calls: AtomicUsize::new(0),
        }
    }

    /// Answers every call with `reply`.
    pub fn constant(reply: impl Into<String>) -> Self {
        let reply = reply.into();
        Self::from_fn(move |_| Ok(reply.clone()))
    }

    /// "Yes" to filter calls and a fixed sentence per explanation task.
    pub fn always_yes() -> Self {
        Self::from_fn(|req| {
            Ok(match req.task {
                VlmTask::Filter => "Yes".into(),
                VlmTask::LocalExplanation => "The marked part has an implausible structure.".into(),
                VlmTask::GlobalExplanation => {
                    "The image shows body parts that are malformed.".into()
                }
            })
        })
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl VlmClient for MockVlmClient {
    fn complete(&self, req: &VlmRequest) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.respond)(req)
    }
}

/// Request-key to reply map, stored as a sorted JSON object.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Transcript {
    pub entries: BTreeMap<String, String>,
}

impl Transcript {
    pub fn parse(text: &str) -> Result<Self, CurationError> {
        serde_json::from_str(text).map_err(|e| CurationError::Transcript(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CurationError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CurationError::Transcript(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("transcript serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), CurationError> {
        std::fs::write(path, self.to_json())
            .map_err(|e| CurationError::Transcript(format!("{}: {e}", path.display())))
    }
}

/// Passes calls through and remembers every successful reply.
pub struct RecordingClient<C> {
    inner: C,
    transcript: Mutex<Transcript>,
}

impl<C: VlmClient> RecordingClient<C> {
    pub fn new(inner: C) -> Self {
        Self {
            inner,
            transcript: Mutex::new(Transcript::default()),
        }
    }

    pub fn transcript(&self) -> Transcript {
        self.transcript.lock().expect("transcript lock").clone()
    }
}

impl<C: VlmClient> VlmClient for RecordingClient<C> {
    fn complete(&self, req: &VlmRequest) -> Result<String, TransportError> {
        let reply = self.inner.complete(req)?;
        self.transcript
            .lock()
            .expect("transcript lock")
            .entries
            .insert(request_key(req), reply.clone());
        Ok(reply)
    }
}

/// Answers from a transcript; unknown requests fail without retry.
pub struct ReplayClient {
    transcript: Transcript,
}

impl ReplayClient {
    pub fn new(transcript: Transcript) -> Self {
        Self { transcript }
    }
}

impl VlmClient for ReplayClient {
    fn complete(&self, req: &VlmRequest) -> Result<String, TransportError> {
        let key = request_key(req);
        self.transcript
            .entries
            .get(&key)
            .cloned()
            .ok_or_else(|| TransportError::fatal(format!("request {key} not in transcript")))
    }
}
