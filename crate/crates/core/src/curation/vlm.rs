use serde::{Deserialize, Serialize};

use crate::grid::{ArtifactType, PixelRect};
use crate::injection::PixelImage;

use super::client::{call_with_retry, RetryPolicy, VlmClient, VlmRequest, VlmTask};
use super::prompts::{render_filter_prompt, render_global_prompt, render_local_prompt};
use super::{CurationError, Triplet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VlmOptions {
    pub model: String,
    pub retry: RetryPolicy,
}

impl Default for VlmOptions {
    fn default() -> Self {
        Self {
            model: "mock".into(),
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum FilterVerdict {
    Keep,
    Reject,
    /// The reply was neither yes nor no; treated as a rejection.
    Unparseable {
        reply: String,
    },
}

impl FilterVerdict {
    pub fn keeps(&self) -> bool {
        matches!(self, FilterVerdict::Keep)
    }
}

/// `Some(true)` for a bare yes, `Some(false)` for a bare no.
///
/// Case, surrounding whitespace, quotes and one trailing `.` or `!` are
/// ignored; anything else is unparseable.
pub fn parse_yes_no(reply: &str) -> Option<bool> {
    let t = reply
        .trim()
        .trim_matches(|c| c == '"' || c == '\'' || c == '*');
    let t = t.strip_suffix(['.', '!']).unwrap_or(t).trim();
    match t.to_ascii_lowercase().as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

fn triplet_images(t: &Triplet) -> Vec<Vec<u8>> {
    vec![
        t.masked_original.to_png_bytes(),
        t.cropped_original.to_png_bytes(),
        t.cropped_artifact.to_png_bytes(),
    ]
}

fn non_empty(text: String) -> Result<String, CurationError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        Err(CurationError::EmptyReply)
    } else {
        Ok(trimmed.to_string())
    }
}

/// Asks the judge whether the triplet shows the injected artifact.
///
/// Only duplication, omission and fusion go through this filter.
pub fn vlm_filter(
    triplet: &Triplet,
    artifact: ArtifactType,
    client: &dyn VlmClient,
    opts: &VlmOptions,
) -> Result<FilterVerdict, CurationError> {
    if artifact == ArtifactType::Distortion {
        return Err(CurationError::InvalidInput(
            "distortion is gated by the perceptual metric".into(),
        ));
    }
    let req = VlmRequest {
        task: VlmTask::Filter,
        model: opts.model.clone(),
        prompt: render_filter_prompt(artifact, &triplet.entity_name),
        images: triplet_images(triplet),
    };
    let reply = call_with_retry(client, &req, &opts.retry)?;
    Ok(match parse_yes_no(&reply) {
        Some(true) => FilterVerdict::Keep,
        Some(false) => FilterVerdict::Reject,
        None => FilterVerdict::Unparseable { reply },
    })
}

/// One-sentence description of what changed inside the triplet region.
pub fn local_explanation(
    triplet: &Triplet,
    artifact: ArtifactType,
    client: &dyn VlmClient,
    opts: &VlmOptions,
) -> Result<String, CurationError> {
    let req = VlmRequest {
        task: VlmTask::LocalExplanation,
        model: opts.model.clone(),
        prompt: render_local_prompt(artifact, &triplet.entity_name),
        images: triplet_images(triplet),
    };
    non_empty(call_with_retry(client, &req, &opts.retry)?)
}

/// Whole-image explanation built from the per-region descriptions.
pub fn global_explanation(
    artifact_image: &PixelImage,
    locals: &[(PixelRect, String)],
    client: &dyn VlmClient,
    opts: &VlmOptions,
) -> Result<String, CurationError> {
    if locals.is_empty() {
        return Err(CurationError::InvalidInput(
            "global explanation needs at least one local explanation".into(),
        ));
    }
    let req = VlmRequest {
        task: VlmTask::GlobalExplanation,
        model: opts.model.clone(),
        prompt: render_global_prompt(locals),
        images: vec![artifact_image.to_png_bytes()],
    };
    non_empty(call_with_retry(client, &req, &opts.retry)?)
}
