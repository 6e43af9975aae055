use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::curation::{
    FilterThresholds, HttpVlmClient, MockVlmClient, ReplayClient, RetryPolicy, Transcript,
    VlmClient, VlmOptions,
};
use crate::grid::Tool;
use crate::injection::InjectionSchedule;
use crate::perception::GroundingThresholds;
use crate::toolbox::ToolParams;

use super::PipelineError;

/// List of scene manifests making up one corpus.
///
/// ```json
/// {"scenes": ["img_001/scene.json", "img_002/scene.json"]}
/// ```
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub scenes: Vec<PathBuf>,
}

impl CorpusManifest {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text)
            .map_err(|e| PipelineError::Config(format!("corpus manifest: {e}")))
    }

    /// Loads the corpus and resolves scene paths against its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut corpus = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for s in &mut corpus.scenes {
            if s.is_relative() {
                *s = base.join(&*s);
            }
        }
        Ok(corpus)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClientKind {
    /// Built-in scripted judge that accepts everything.
    #[default]
    Mock,
    Http,
    /// Answers from a recorded transcript.
    Replay,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClientConfig {
    pub kind: ClientKind,
    pub endpoint: Option<String>,
    pub model: String,
    pub timeout_ms: u64,
    /// Replay source for `replay`; for `http`, replies are recorded here.
    pub transcript: Option<PathBuf>,
    pub retry: RetryPolicy,
}

impl Default for ClientConfig {
    fn default() -> Self {
        let opts = VlmOptions::default();
        Self {
            kind: ClientKind::Mock,
            endpoint: None,
            model: opts.model,
            timeout_ms: 60_000,
            transcript: None,
            retry: opts.retry,
        }
    }
}

impl ClientConfig {
    pub fn options(&self) -> VlmOptions {
        VlmOptions {
            model: self.model.clone(),
            retry: self.retry,
        }
    }

    /// Builds the configured client. The HTTP key is read from the
    /// environment, never from the file.
    pub fn build(&self) -> Result<Box<dyn VlmClient>, PipelineError> {
        Ok(match self.kind {
            ClientKind::Mock => Box::new(MockVlmClient::always_yes()),
            ClientKind::Http => {
                let endpoint = self.endpoint.clone().ok_or_else(|| {
                    PipelineError::Config("client.endpoint is required for http".into())
                })?;
                Box::new(HttpVlmClient::from_env(
                    endpoint,
                    Duration::from_millis(self.timeout_ms),
                ))
            }
            ClientKind::Replay => {
                let path = self.transcript.as_ref().ok_or_else(|| {
                    PipelineError::Config("client.transcript is required for replay".into())
                })?;
                let t = Transcript::load(path).map_err(|e| PipelineError::Config(e.to_string()))?;
                Box::new(ReplayClient::new(t))
            }
        })
    }
}

/// Everything a run needs, loaded from one TOML file.
///
/// ```toml
/// input = "corpus.json"
/// output_dir = "out"
/// seed = 7
/// patch_px = 16
/// tools = ["add", "remove", "distort", "fuse"]
///
/// [params.fuse]
/// reversed_fraction = 0.25
///
/// [client]
/// kind = "http"
/// endpoint = "http://localhost:8080/v1/judge"
/// ```
///
/// Relative paths resolve against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Corpus manifest listing the scenes.
    pub input: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_patch_px")]
    pub patch_px: u32,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub parallelism: usize,
    #[serde(default = "default_tools")]
    pub tools: Vec<Tool>,
    /// One job per applicable tool instead of a single job per image.
    #[serde(default)]
    pub expand_all_tools: bool,
    /// Feather width in pixels at pasted patch borders.
    #[serde(default)]
    pub blend: u32,
    #[serde(default)]
    pub grounding: GroundingThresholds,
    #[serde(default)]
    pub thresholds: FilterThresholds,
    #[serde(default)]
    pub schedule: InjectionSchedule,
    #[serde(default)]
    pub params: ToolParams,
    #[serde(default)]
    pub client: ClientConfig,
}

fn default_patch_px() -> u32 {
    16
}

fn default_tools() -> Vec<Tool> {
    Tool::ALL.to_vec()
}

impl PipelineConfig {
    /// Config with defaults for everything but the two paths.
    pub fn new(input: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            output_dir: output_dir.into(),
            seed: 0,
            patch_px: default_patch_px(),
            parallelism: 0,
            tools: default_tools(),
            expand_all_tools: false,
            blend: 0,
            grounding: GroundingThresholds::default(),
            thresholds: FilterThresholds::default(),
            schedule: InjectionSchedule::default(),
            params: ToolParams::default(),
            client: ClientConfig::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.input);
        fix(&mut self.output_dir);
        if let Some(t) = self.client.transcript.as_mut() {
            fix(t);
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.patch_px == 0 {
            return bad("patch_px must be positive".into());
        }
        if self.tools.is_empty() {
            return bad("tools must name at least one tool".into());
        }
        if !self.input.is_file() {
            return bad(format!(
                "input {} is not a readable file",
                self.input.display()
            ));
        }
        if !(0.0..=1.0).contains(&self.grounding.patch_fg)
            || !(0.0..=1.0).contains(&self.grounding.containment)
        {
            return bad("grounding thresholds must lie in [0, 1]".into());
        }
        self.thresholds
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.schedule
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.params
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        match self.client.kind {
            ClientKind::Mock => {}
            ClientKind::Http => {
                if self.client.endpoint.as_deref().is_none_or(str::is_empty) {
                    return bad("client.endpoint is required for http".into());
                }
            }
            ClientKind::Replay => match &self.client.transcript {
                Some(t) if t.is_file() => {}
                Some(t) => {
                    return bad(format!("transcript {} is not a readable file", t.display()))
                }
                None => return bad("client.transcript is required for replay".into()),
            },
        }
        if self.client.retry.attempts == 0 {
            return bad("client.retry.attempts must be at least 1".into());
        }
        Ok(())
    }
}
