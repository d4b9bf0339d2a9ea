use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{GatewayError, RenderedRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Fixture,
    Mock,
}

/// Something that turns a rendered prompt into a raw completion string.
///
/// Implementations must tolerate concurrent calls.
pub trait Backend: Send + Sync {
    fn kind(&self) -> BackendKind;
    fn complete(&self, request: &RenderedRequest) -> Result<String, GatewayError>;
}

type Responder<'a> = dyn Fn(&RenderedRequest) -> Result<String, GatewayError> + Send + Sync + 'a;

/// In-process backend answering from a digest map or a closure.
pub struct MockBackend<'a> {
    responder: Box<Responder<'a>>,
}

impl<'a> MockBackend<'a> {
    pub fn from_map(responses: HashMap<String, String>) -> Self {
        Self::from_fn(move |r| {
            responses
                .get(&r.digest)
                .cloned()
                .ok_or_else(|| GatewayError::MockMiss {
                    digest: r.digest.clone(),
                })
        })
    }

    pub fn from_fn(
        f: impl Fn(&RenderedRequest) -> Result<String, GatewayError> + Send + Sync + 'a,
    ) -> Self {
        Self {
            responder: Box::new(f),
        }
    }
}

impl Backend for MockBackend<'_> {
    fn kind(&self) -> BackendKind {
        BackendKind::Mock
    }

    fn complete(&self, request: &RenderedRequest) -> Result<String, GatewayError> {
        (self.responder)(request)
    }
}

/// One line of a fixture file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub digest: String,
    pub raw_response: String,
}

/// Replays recorded responses keyed by request digest. Never touches the network.
#[derive(Debug, Default, Clone)]
pub struct FixtureBackend {
    responses: HashMap<String, String>,
}

impl FixtureBackend {
    pub fn new(entries: impl IntoIterator<Item = FixtureEntry>) -> Self {
        Self {
            responses: entries
                .into_iter()
                .map(|e| (e.digest, e.raw_response))
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let file = File::open(path)?;
        let mut entries = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: FixtureEntry = serde_json::from_str(&line).map_err(|e| {
                GatewayError::Format(format!("{}:{}: {e}", path.display(), idx + 1))
            })?;
            entries.push(entry);
        }
        Ok(Self::new(entries))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl Backend for FixtureBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Fixture
    }

    fn complete(&self, request: &RenderedRequest) -> Result<String, GatewayError> {
        self.responses
            .get(&request.digest)
            .cloned()
            .ok_or_else(|| GatewayError::FixtureMiss {
                digest: request.digest.clone(),
            })
    }
}

/// Forwards to an inner backend and appends every new response to a fixture file.
pub struct RecordingBackend<B> {
    inner: B,
    path: PathBuf,
    state: Mutex<(File, std::collections::HashSet<String>)>,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B, path: &Path) -> Result<Self, GatewayError> {
        let seen = if path.exists() {
            FixtureBackend::load(path)?.responses.into_keys().collect()
        } else {
            Default::default()
        };
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            inner,
            path: path.to_path_buf(),
            state: Mutex::new((file, seen)),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn kind(&self) -> BackendKind {
        self.inner.kind()
    }

    fn complete(&self, request: &RenderedRequest) -> Result<String, GatewayError> {
        let raw = self.inner.complete(request)?;
        let mut guard = self.state.lock().expect("fixture writer poisoned");
        let (file, seen) = &mut *guard;
        if seen.insert(request.digest.clone()) {
            let entry = FixtureEntry {
                digest: request.digest.clone(),
                raw_response: raw.clone(),
            };
            let mut line = serde_json::to_string(&entry).expect("fixture entry serializes");
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        Ok(raw)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveConfig {
    /// Base URL of a chat-completions style API, e.g. `http://localhost:8000/v1`.
    pub base_url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

/// Chat-completions client. The endpoint is treated as opaque; only the
/// first choice's message content is read.
pub struct LiveBackend {
    config: LiveConfig,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    content: Option<String>,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        Self { config, agent }
    }

    fn endpoint(&self) -> String {
        format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        )
    }
}

impl Backend for LiveBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Live
    }

    fn complete(&self, request: &RenderedRequest) -> Result<String, GatewayError> {
        let body = ChatRequest {
            model: &request.model_id,
            messages: [ChatMessage {
                role: "user",
                content: &request.prompt,
            }],
            temperature: request.decoding.temperature,
            max_tokens: request.decoding.max_output_tokens,
        };
        let mut call = self.agent.post(self.endpoint());
        if let Some(key) = &self.config.api_key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = call.send_json(&body).map_err(|e| match e {
            ureq::Error::StatusCode(code) if code != 429 && code < 500 => {
                GatewayError::InvalidRequest(format!(
                    "endpoint rejected request with status {code}"
                ))
            }
            other => GatewayError::Transport(other.to_string()),
        })?;
        let parsed: ChatResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| GatewayError::Format(format!("unexpected endpoint payload: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| GatewayError::Format("endpoint returned no message content".into()))
    }
}
