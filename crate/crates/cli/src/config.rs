use std::path::{Path, PathBuf};
use std::time::Duration;

use breadthcloud::concepts::DEFAULT_N_TOPICS;
use breadthcloud::layout::{Canvas, FontRange, SpiralConfig, DEFAULT_MAX_PT, DEFAULT_MIN_PT};
use breadthcloud::llm::{
    default_elicitation_template, default_mapping_template, default_soft_mapping_template,
    Decoding, LiveConfig, PromptTemplate, TemplateRole, ELICITATION_VARIABLES, MAPPING_VARIABLES,
};
use breadthcloud::mapping::{validate_tau, DEFAULT_TAU};
use breadthcloud::salience::DEFAULT_DIFF_MARGIN;
use breadthcloud::{CorpusFormat, MappingMode, ScaleMode};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const ENV_ENDPOINT: &str = "BREADTHCLOUD_ENDPOINT";
pub const ENV_API_KEY: &str = "BREADTHCLOUD_API_KEY";
pub const ENV_MODEL: &str = "BREADTHCLOUD_MODEL";
pub const ENV_TEMPERATURE: &str = "BREADTHCLOUD_TEMPERATURE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    /// Replay recorded responses from `fixtures`.
    Fixture,
    /// Call `endpoint`; with `record = true` new responses are appended to `fixtures`.
    Live,
}

/// Run configuration. Every field has a default; relative paths resolve
/// against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus_root: PathBuf,
    pub corpus_format: CorpusFormat,
    /// Conditions to process; empty means every condition in the corpus.
    pub conditions: Vec<String>,
    pub n_topics: usize,
    pub mode: MappingMode,
    pub tau: f64,
    pub scale: ScaleMode,
    pub margin: u32,
    /// Cap on concepts per cloud; none shows every concept with b > 0.
    pub top_k: Option<usize>,
    pub freq_top_k: usize,
    pub seed: u64,
    pub canvas_width: f64,
    pub canvas_height: f64,
    pub min_pt: f64,
    pub max_pt: f64,
    pub padding: f64,
    pub spiral_radial_step: f64,
    pub spiral_angular_step: f64,
    pub backend: BackendChoice,
    pub fixtures: PathBuf,
    pub record: bool,
    pub endpoint: Option<String>,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub timeout_secs: u64,
    pub elicitation_prompt: Option<PathBuf>,
    pub mapping_prompt: Option<PathBuf>,
    pub soft_mapping_prompt: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus_root: "corpus".into(),
            corpus_format: CorpusFormat::DirectoryOfText,
            conditions: Vec::new(),
            n_topics: DEFAULT_N_TOPICS,
            mode: MappingMode::Binary,
            tau: DEFAULT_TAU,
            scale: ScaleMode::Linear,
            margin: DEFAULT_DIFF_MARGIN,
            top_k: None,
            freq_top_k: 20,
            seed: 7,
            canvas_width: 960.0,
            canvas_height: 540.0,
            min_pt: DEFAULT_MIN_PT,
            max_pt: DEFAULT_MAX_PT,
            padding: 2.0,
            spiral_radial_step: 2.0,
            spiral_angular_step: 0.35,
            backend: BackendChoice::Fixture,
            fixtures: "fixtures.jsonl".into(),
            record: false,
            endpoint: None,
            api_key: None,
            model_id: "default".into(),
            temperature: 0.0,
            max_output_tokens: 2048,
            timeout_secs: 120,
            elicitation_prompt: None,
            mapping_prompt: None,
            soft_mapping_prompt: None,
            stopwords: None,
            output_dir: "runs".into(),
        }
    }
}

impl RunConfig {
    /// Reads `path` (TOML), resolves relative paths against its directory,
    /// and applies environment overrides.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut config = Self::from_toml(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let base = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.apply_env(|k| std::env::var(k).ok())?;
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.corpus_root);
        join(&mut self.fixtures);
        join(&mut self.output_dir);
        for p in [
            &mut self.elicitation_prompt,
            &mut self.mapping_prompt,
            &mut self.soft_mapping_prompt,
            &mut self.stopwords,
        ]
        .into_iter()
        .flatten()
        {
            join(p);
        }
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), CliError> {
        if let Some(v) = var(ENV_ENDPOINT) {
            self.endpoint = Some(v);
        }
        if let Some(v) = var(ENV_API_KEY) {
            self.api_key = Some(v);
        }
        if let Some(v) = var(ENV_MODEL) {
            self.model_id = v;
        }
        if let Some(v) = var(ENV_TEMPERATURE) {
            self.temperature = v.parse().map_err(|_| {
                CliError::Validation(format!("{ENV_TEMPERATURE}={v:?} is not a number"))
            })?;
        }
        Ok(())
    }

    /// Checks ranges and that every referenced path exists.
    pub fn validate(&self) -> Result<(), CliError> {
        let invalid = |m: String| Err(CliError::Validation(m));
        if self.n_topics == 0 {
            return invalid("n_topics must be at least 1".into());
        }
        validate_tau(self.tau).map_err(|e| CliError::Validation(e.to_string()))?;
        self.font_range()
            .validate()
            .map_err(|e| CliError::Validation(e.to_string()))?;
        if !(self.canvas_width > 0.0 && self.canvas_height > 0.0) {
            return invalid(format!(
                "canvas must be positive, got {}x{}",
                self.canvas_width, self.canvas_height
            ));
        }
        if self.padding.is_nan() || self.padding < 0.0 {
            return invalid(format!(
                "padding must be non-negative, got {}",
                self.padding
            ));
        }
        if !(self.spiral_radial_step > 0.0 && self.spiral_angular_step > 0.0) {
            return invalid("spiral steps must be positive".into());
        }
        if self.freq_top_k == 0 || self.top_k == Some(0) {
            return invalid("top_k must be at least 1".into());
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return invalid(format!(
                "temperature must lie in [0, 2], got {}",
                self.temperature
            ));
        }
        if !self.corpus_root.exists() {
            return invalid(format!(
                "corpus_root {} does not exist",
                self.corpus_root.display()
            ));
        }
        match self.backend {
            BackendChoice::Fixture if !self.fixtures.exists() => {
                return invalid(format!(
                    "fixture file {} does not exist",
                    self.fixtures.display()
                ));
            }
            BackendChoice::Live if self.endpoint.is_none() => {
                return invalid(format!("live backend needs `endpoint` or {ENV_ENDPOINT}"));
            }
            _ => {}
        }
        for p in [
            &self.elicitation_prompt,
            &self.mapping_prompt,
            &self.soft_mapping_prompt,
            &self.stopwords,
        ]
        .into_iter()
        .flatten()
        {
            if !p.exists() {
                return invalid(format!("{} does not exist", p.display()));
            }
        }
        Ok(())
    }

    /// First 8 hex chars of the hash of the serialized config (credential excluded).
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))[..8].to_string()
    }

    pub fn font_range(&self) -> FontRange {
        FontRange {
            min_pt: self.min_pt,
            max_pt: self.max_pt,
        }
    }

    pub fn canvas(&self) -> Canvas {
        Canvas {
            width: self.canvas_width,
            height: self.canvas_height,
        }
    }

    pub fn spiral(&self) -> SpiralConfig {
        SpiralConfig {
            radial_step: self.spiral_radial_step,
            angular_step: self.spiral_angular_step,
        }
    }

    pub fn decoding(&self) -> Decoding {
        Decoding {
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
        }
    }

    pub fn live_config(&self) -> Option<LiveConfig> {
        self.endpoint.as_ref().map(|base_url| LiveConfig {
            base_url: base_url.clone(),
            api_key: self.api_key.clone(),
            timeout: Duration::from_secs(self.timeout_secs),
        })
    }

    pub fn elicitation_template(&self) -> Result<PromptTemplate, CliError> {
        load_template(
            &self.elicitation_prompt,
            TemplateRole::Elicitation,
            ELICITATION_VARIABLES,
        )
        .unwrap_or_else(|| Ok(default_elicitation_template()))
    }

    /// The template matching `mode`.
    pub fn mapping_template(&self, mode: MappingMode) -> Result<PromptTemplate, CliError> {
        let (path, fallback): (_, fn() -> PromptTemplate) = match mode {
            MappingMode::Binary => (&self.mapping_prompt, default_mapping_template),
            MappingMode::Soft => (&self.soft_mapping_prompt, default_soft_mapping_template),
        };
        load_template(path, TemplateRole::Mapping, MAPPING_VARIABLES)
            .unwrap_or_else(|| Ok(fallback()))
    }
}

fn load_template(
    path: &Option<PathBuf>,
    role: TemplateRole,
    declared: &[&str],
) -> Option<Result<PromptTemplate, CliError>> {
    let path = path.as_ref()?;
    Some((|| {
        let body = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read prompt {}: {e}", path.display()))
        })?;
        let name = path
            .file_stem()
            .map_or_else(|| "prompt".into(), |s| s.to_string_lossy().into_owned());
        PromptTemplate::with_declared(name, role, body, declared)
            .map_err(|e| CliError::Validation(e.to_string()))
    })())
}
