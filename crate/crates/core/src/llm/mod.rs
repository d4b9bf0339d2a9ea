//! Provider-agnostic completion gateway.
//!
//! Prompts are rendered from [`PromptTemplate`]s, sent to a [`Backend`]
//! (live HTTP endpoint, recorded fixtures, or an in-process mock) and every
//! successful exchange is appended to a [`RunLog`]. Requests are identified by
//! a content digest over the rendered prompt, model id and decoding settings,
//! which is also the fixture lookup key.

mod backend;
mod parse;
mod record;
mod template;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use backend::{
    Backend, BackendKind, FixtureBackend, FixtureEntry, LiveBackend, LiveConfig, MockBackend,
    RecordingBackend,
};
pub use parse::{
    parse_bullet_list, parse_line_list, parse_score_list, BulletGroups, LineListParse,
    ScoreListParse,
};
pub use record::{CompletionRecord, RunLog};
pub use template::{
    default_elicitation_template, default_mapping_template, default_soft_mapping_template,
    render_prompt, PromptTemplate, TemplateRole, ELICITATION_PROMPT, ELICITATION_VARIABLES,
    MAPPING_PROMPT, MAPPING_SOFT_PROMPT, MAPPING_VARIABLES,
};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("template error: {0}")]
    Template(String),
    #[error("template {template} has no value for placeholder {{{placeholder}}}")]
    UnboundPlaceholder {
        template: String,
        placeholder: String,
    },
    #[error("transport error: {0}")]
    Transport(String),
    #[error(
        "no recorded response for request digest {digest}; re-record the fixture file against a live endpoint"
    )]
    FixtureMiss { digest: String },
    #[error("mock backend has no response for request digest {digest}")]
    MockMiss { digest: String },
    #[error("response format error: {0}")]
    Format(String),
    #[error("group {group:?} has {got} items, expected {expected}")]
    Underfull {
        group: String,
        expected: usize,
        got: usize,
        partial: BulletGroups,
    },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("run log: {0}")]
    Io(#[from] std::io::Error),
}

impl GatewayError {
    /// Transport failures may succeed on a second attempt; nothing else will.
    pub fn is_retriable(&self) -> bool {
        matches!(self, GatewayError::Transport(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for Decoding {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_output_tokens: 2048,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompletionRequest {
    pub template: PromptTemplate,
    pub variables: BTreeMap<String, String>,
    pub model_id: String,
    pub decoding: Decoding,
}

impl CompletionRequest {
    pub fn new(template: PromptTemplate, model_id: impl Into<String>, decoding: Decoding) -> Self {
        Self {
            template,
            variables: BTreeMap::new(),
            model_id: model_id.into(),
            decoding,
        }
    }

    pub fn var(mut self, name: &str, value: impl Into<String>) -> Self {
        self.variables.insert(name.to_string(), value.into());
        self
    }

    /// Forces temperature 0 for callers that need repeatable output.
    pub fn deterministic(mut self) -> Self {
        self.decoding.temperature = 0.0;
        self
    }

    pub fn render(&self) -> Result<RenderedRequest, GatewayError> {
        if !(self.decoding.temperature >= 0.0 && self.decoding.temperature.is_finite()) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature must be a finite value >= 0, got {}",
                self.decoding.temperature
            )));
        }
        if self.decoding.max_output_tokens == 0 {
            return Err(GatewayError::InvalidRequest(
                "max_output_tokens must be positive".into(),
            ));
        }
        let prompt = self.template.render(&self.variables)?;
        Ok(RenderedRequest::new(
            prompt,
            self.model_id.clone(),
            self.decoding,
        ))
    }
}

/// A fully rendered prompt plus everything that feeds the request digest.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedRequest {
    pub prompt: String,
    pub model_id: String,
    pub decoding: Decoding,
    pub digest: String,
}

impl RenderedRequest {
    pub fn new(prompt: String, model_id: String, decoding: Decoding) -> Self {
        let digest = request_digest(&prompt, &model_id, &decoding);
        Self {
            prompt,
            model_id,
            decoding,
            digest,
        }
    }

    /// Same request with an extra instruction appended (used for re-prompts).
    pub fn with_suffix(&self, suffix: &str) -> Self {
        Self::new(
            format!("{}\n\n{suffix}", self.prompt),
            self.model_id.clone(),
            self.decoding,
        )
    }
}

/// SHA-256 over a canonical JSON encoding of prompt, model and decoding.
pub fn request_digest(prompt: &str, model_id: &str, decoding: &Decoding) -> String {
    let canonical = serde_json::json!({
        "max_output_tokens": decoding.max_output_tokens,
        "model_id": model_id,
        "prompt": prompt,
        "temperature": decoding.temperature,
    });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub transport_retries: u32,
    pub format_reprompts: u32,
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            transport_retries: 2,
            format_reprompts: 1,
            backoff: Duration::from_millis(250),
        }
    }
}

/// Sends one rendered request, retrying transport failures per `policy`.
/// The exchange is logged only when a response was received.
pub fn complete_rendered(
    request: &RenderedRequest,
    backend: &dyn Backend,
    log: Option<&RunLog>,
    policy: &RetryPolicy,
) -> Result<(String, CompletionRecord), GatewayError> {
    let mut attempt = 0;
    let raw = loop {
        match backend.complete(request) {
            Ok(raw) => break raw,
            Err(e) if e.is_retriable() && attempt < policy.transport_retries => {
                attempt += 1;
                tracing::warn!(digest = %request.digest, attempt, error = %e, "retrying completion");
                std::thread::sleep(policy.backoff * attempt);
            }
            Err(e) => return Err(e),
        }
    };
    let record = CompletionRecord::new(&request.digest, &raw, backend.kind(), &request.model_id);
    if let Some(log) = log {
        log.append(&record)?;
    }
    Ok((raw, record))
}

/// Renders and sends `request`; the raw response is returned unmodified.
pub fn complete(
    request: &CompletionRequest,
    backend: &dyn Backend,
    log: Option<&RunLog>,
) -> Result<(String, CompletionRecord), GatewayError> {
    complete_rendered(&request.render()?, backend, log, &RetryPolicy::default())
}

/// Sends `request` and parses the response, re-prompting on format errors
/// up to `policy.format_reprompts` times. When the last attempt still fails
/// the parse error is returned as is, so partial results stay available.
pub fn complete_parsed<T>(
    request: &RenderedRequest,
    backend: &dyn Backend,
    log: Option<&RunLog>,
    policy: &RetryPolicy,
    mut parse: impl FnMut(&str) -> Result<T, GatewayError>,
) -> Result<T, GatewayError> {
    let mut current = request.clone();
    let mut reprompts = 0;
    let mut last_parse_error: Option<GatewayError> = None;
    loop {
        let raw = match complete_rendered(&current, backend, log, policy) {
            Ok((raw, _)) => raw,
            // A failed re-prompt leaves the original format problem as the answer.
            Err(e) => match last_parse_error {
                Some(parse_error) => {
                    tracing::warn!(error = %e, "re-prompt failed");
                    return Err(parse_error);
                }
                None => return Err(e),
            },
        };
        match parse(&raw) {
            Ok(value) => return Ok(value),
            Err(e) if reprompt_worthy(&e) && reprompts < policy.format_reprompts => {
                reprompts += 1;
                tracing::warn!(digest = %current.digest, error = %e, "re-prompting after format error");
                current = request.with_suffix(&reprompt_instruction(&e));
                last_parse_error = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
}

/// Text appended to a prompt when asking the model to answer again.
pub fn reprompt_instruction(error: &GatewayError) -> String {
    let reason = match error {
        GatewayError::Underfull {
            expected,
            got,
            group,
            ..
        } => {
            format!("group {group:?} had {got} distinct items instead of {expected}")
        }
        other => other.to_string(),
    };
    format!(
        "Your previous answer did not follow the output format ({reason}). Answer again, following the output format exactly."
    )
}

fn reprompt_worthy(e: &GatewayError) -> bool {
    matches!(e, GatewayError::Format(_) | GatewayError::Underfull { .. })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(prompt: &str) -> RenderedRequest {
        RenderedRequest::new(prompt.into(), "m".into(), Decoding::default())
    }

    #[test]
    fn digest_depends_on_every_input() {
        let d = Decoding::default();
        let base = request_digest("p", "m", &d);
        assert_eq!(base, request_digest("p", "m", &d));
        assert_ne!(base, request_digest("q", "m", &d));
        assert_ne!(base, request_digest("p", "n", &d));
        let hot = Decoding {
            temperature: 0.7,
            ..d
        };
        assert_ne!(base, request_digest("p", "m", &hot));
        assert_eq!(base.len(), 64);
    }

    #[test]
    fn deterministic_forces_zero_temperature() {
        let t = PromptTemplate::new("t", TemplateRole::Mapping, "x").unwrap();
        let r = CompletionRequest::new(
            t,
            "m",
            Decoding {
                temperature: 0.9,
                max_output_tokens: 10,
            },
        )
        .deterministic();
        assert_eq!(r.decoding.temperature, 0.0);
    }

    #[test]
    fn negative_temperature_is_rejected() {
        let t = PromptTemplate::new("t", TemplateRole::Mapping, "x").unwrap();
        let r = CompletionRequest::new(
            t,
            "m",
            Decoding {
                temperature: -1.0,
                max_output_tokens: 10,
            },
        );
        assert!(matches!(r.render(), Err(GatewayError::InvalidRequest(_))));
    }

    #[test]
    fn transport_errors_retry_twice_then_surface() {
        let calls = std::sync::atomic::AtomicUsize::new(0);
        let backend = MockBackend::from_fn(|_| {
            calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            Err(GatewayError::Transport("down".into()))
        });
        let policy = RetryPolicy {
            backoff: Duration::ZERO,
            ..RetryPolicy::default()
        };
        let err = complete_rendered(&request("p"), &backend, None, &policy).unwrap_err();
        assert!(matches!(err, GatewayError::Transport(_)));
        assert_eq!(calls.load(std::sync::atomic::Ordering::SeqCst), 3);
    }

    #[test]
    fn format_error_reprompts_once() {
        let req = request("p");
        let fixed = req.with_suffix("ignored");
        let backend = MockBackend::from_fn(move |r| {
            if r.digest == req.digest {
                Ok("garbage".into())
            } else {
                Ok("- ok".into())
            }
        });
        let policy = RetryPolicy {
            backoff: Duration::ZERO,
            ..RetryPolicy::default()
        };
        let groups = complete_parsed(&request("p"), &backend, None, &policy, |raw| {
            parse_bullet_list(raw, 1)
        })
        .unwrap();
        assert_eq!(groups.sole().unwrap(), ["ok"]);
        assert_ne!(fixed.digest, request("p").digest);
    }

    #[test]
    fn persistent_format_error_surfaces_after_one_reprompt() {
        let calls = std::sync::atomic::AtomicUsize::new(0);
        let backend = MockBackend::from_fn(|_| {
            calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            Ok("no bullets here".into())
        });
        let err = complete_parsed(
            &request("p"),
            &backend,
            None,
            &RetryPolicy::default(),
            |raw| parse_bullet_list(raw, 1),
        )
        .unwrap_err();
        assert!(matches!(err, GatewayError::Format(_)));
        assert_eq!(calls.load(std::sync::atomic::Ordering::SeqCst), 2);
    }
}
