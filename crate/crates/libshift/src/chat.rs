//! Chat-completion transport with interchangeable backends.
//!
//! The live backend speaks the common chat-completions HTTP API. The replay
//! backend serves completions from line-delimited `request hash → completion`
//! fixtures, and the scripted backend pops completions off a fixed queue;
//! both are fully deterministic given their fixture data. A recording
//! wrapper turns any backend's traffic into replay fixtures.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> ChatMessage {
        ChatMessage { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> ChatMessage {
        ChatMessage { role: "user".into(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> ChatMessage {
        ChatMessage { role: "assistant".into(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    /// Distinguishes otherwise-identical stochastic samples in fixtures.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_index: Option<u32>,
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, messages: Vec<ChatMessage>, temperature: f64) -> Self {
        ChatRequest {
            model: model.into(),
            messages,
            temperature,
            sample_index: None,
        }
    }

    pub fn with_sample_index(mut self, index: u32) -> Self {
        self.sample_index = Some(index);
        self
    }

    /// Stable content hash used as the replay fixture key.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("request serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("API returned status {status}: {body}")]
    Api { status: u16, body: String },
    #[error("completion had no message content")]
    MissingContent,
    #[error("API key environment variable `{0}` is not set")]
    MissingApiKey(String),
    #[error("no fixture for request {0}")]
    FixtureMiss(String),
    #[error("scripted backend ran out of completions")]
    ScriptExhausted,
    #[error("fixture I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("fixture parse error: {0}")]
    Fixture(String),
}

/// A completion source. Implementations must be deterministic for the
/// replay and scripted backends; the live backend is as deterministic as
/// the remote endpoint.
pub trait ChatClient: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, ChatError>;
}

impl<C: ChatClient + ?Sized> ChatClient for Box<C> {
    fn complete(&self, request: &ChatRequest) -> Result<String, ChatError> {
        (**self).complete(request)
    }
}

// ---------------------------------------------------------------------------
// Live backend
// ---------------------------------------------------------------------------

pub struct LiveClient {
    base_url: String,
    api_key: String,
    agent: ureq::Agent,
}

impl LiveClient {
    /// Reads the API key from `key_env` at construction time.
    pub fn new(base_url: &str, key_env: &str) -> Result<LiveClient, ChatError> {
        let api_key =
            std::env::var(key_env).map_err(|_| ChatError::MissingApiKey(key_env.to_string()))?;
        Ok(LiveClient {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            agent: ureq::Agent::new_with_defaults(),
        })
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

impl ChatClient for LiveClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, ChatError> {
        let url = format!("{}/chat/completions", self.base_url);
        let body = WireRequest {
            model: &request.model,
            messages: &request.messages,
            temperature: request.temperature,
        };
        let mut response = self
            .agent
            .post(&url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|err| match err {
                ureq::Error::StatusCode(status) => ChatError::Api {
                    status,
                    body: String::new(),
                },
                other => ChatError::Transport(other.to_string()),
            })?;
        let parsed: WireResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| ChatError::Transport(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or(ChatError::MissingContent)
    }
}

// ---------------------------------------------------------------------------
// Replay backend
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct FixtureRecord {
    hash: String,
    completion: String,
}

/// Serves completions recorded earlier, keyed by request fingerprint.
pub struct ReplayClient {
    fixtures: HashMap<String, String>,
}

impl ReplayClient {
    pub fn from_file(path: &Path) -> Result<ReplayClient, ChatError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn from_text(text: &str) -> Result<ReplayClient, ChatError> {
        let mut fixtures = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: FixtureRecord = serde_json::from_str(line)
                .map_err(|e| ChatError::Fixture(format!("line {}: {e}", lineno + 1)))?;
            fixtures.insert(record.hash, record.completion);
        }
        Ok(ReplayClient { fixtures })
    }

    pub fn len(&self) -> usize {
        self.fixtures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures.is_empty()
    }
}

impl ChatClient for ReplayClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, ChatError> {
        let key = request.fingerprint();
        self.fixtures
            .get(&key)
            .cloned()
            .ok_or_else(|| ChatError::FixtureMiss(key[..12].to_string()))
    }
}

// ---------------------------------------------------------------------------
// Scripted backend
// ---------------------------------------------------------------------------

/// Pops completions off a fixed queue, in order, regardless of the request.
pub struct ScriptedClient {
    queue: Mutex<std::collections::VecDeque<String>>,
}

impl ScriptedClient {
    pub fn new(completions: Vec<String>) -> ScriptedClient {
        ScriptedClient {
            queue: Mutex::new(completions.into()),
        }
    }

    /// Load a completion queue from a JSON array of strings.
    pub fn from_file(path: &Path) -> Result<ScriptedClient, ChatError> {
        let text = std::fs::read_to_string(path)?;
        let completions: Vec<String> =
            serde_json::from_str(&text).map_err(|e| ChatError::Fixture(e.to_string()))?;
        Ok(ScriptedClient::new(completions))
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().expect("queue poisoned").len()
    }
}

impl ChatClient for ScriptedClient {
    fn complete(&self, _request: &ChatRequest) -> Result<String, ChatError> {
        self.queue
            .lock()
            .expect("queue poisoned")
            .pop_front()
            .ok_or(ChatError::ScriptExhausted)
    }
}

// ---------------------------------------------------------------------------
// Recording wrapper
// ---------------------------------------------------------------------------

/// Delegates to an inner backend and appends every exchange to a replay
/// fixture file.
pub struct RecordingClient<C: ChatClient> {
    inner: C,
    path: PathBuf,
    sink: Mutex<std::fs::File>,
}

impl<C: ChatClient> RecordingClient<C> {
    pub fn create(inner: C, path: &Path) -> Result<RecordingClient<C>, ChatError> {
        let sink = std::fs::File::create(path)?;
        Ok(RecordingClient {
            inner,
            path: path.to_path_buf(),
            sink: Mutex::new(sink),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl<C: ChatClient> ChatClient for RecordingClient<C> {
    fn complete(&self, request: &ChatRequest) -> Result<String, ChatError> {
        let completion = self.inner.complete(request)?;
        let record = FixtureRecord {
            hash: request.fingerprint(),
            completion: completion.clone(),
        };
        let line = serde_json::to_string(&record).expect("record serializes");
        let mut sink = self.sink.lock().expect("sink poisoned");
        writeln!(sink, "{line}")?;
        Ok(completion)
    }
}
