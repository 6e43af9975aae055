//! Records and VQA turns on line-delimited JSON.

mod jsonl;
mod vqa;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curation::LocalExplanation;
use crate::grid::{ArtifactType, PixelRect};
use crate::toolbox::ToolParamsSnapshot;

pub use jsonl::{parse_jsonl, read_jsonl, JsonlWriter};
pub use vqa::{
    emit_vqa_artifact, emit_vqa_clean, format_bbox, format_bbox_list, Split, VqaSample, VqaTask,
    VqaTurn, VQA_SCHEMA_VERSION,
};

pub const RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("invalid record: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// A subentity visible in the clean image, with its pixel box.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundedPart {
    pub entity: String,
    pub subentity: String,
    pub bbox: PixelRect,
}

/// One clean/artifact pair with its annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactRecord {
    pub schema_version: u32,
    pub record_id: String,
    pub image_id: String,
    /// Paths are relative to the run's output directory.
    pub source_image: String,
    pub artifact_image: String,
    pub mapping_export: String,
    pub image_width: u32,
    pub image_height: u32,
    pub artifact_type: ArtifactType,
    /// Entity (or `a+b` pair for fusion) the artifact was placed on.
    pub entity: String,
    pub subentity: Option<String>,
    pub target_bboxes: Vec<PixelRect>,
    pub local_explanations: Vec<LocalExplanation>,
    pub global_explanation: String,
    pub caption: String,
    pub grounded: Vec<GroundedPart>,
    pub seed: u64,
    pub params: ToolParamsSnapshot,
}

impl ArtifactRecord {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::Invalid(format!("{}: {m}", self.record_id)));
        if self.schema_version != RECORD_SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {}",
                self.schema_version
            ));
        }
        if self.params.tool() != self.artifact_type.tool() {
            return bad(format!(
                "params for {} on a {} record",
                self.params.tool(),
                self.artifact_type
            ));
        }
        if self.target_bboxes.is_empty() {
            return bad("no target bbox".into());
        }
        let boxes = self
            .target_bboxes
            .iter()
            .chain(self.grounded.iter().map(|g| &g.bbox));
        for b in boxes.chain(self.local_explanations.iter().map(|l| &l.bbox)) {
            if b.is_empty() || !b.within(self.image_width, self.image_height) {
                return bad(format!(
                    "bbox {b} outside {}x{}",
                    self.image_width, self.image_height
                ));
            }
        }
        if self.local_explanations.len() != self.target_bboxes.len()
            || self
                .local_explanations
                .iter()
                .any(|l| !self.target_bboxes.contains(&l.bbox))
        {
            return bad("local explanations must match the target bboxes one to one".into());
        }
        for (name, text) in [
            ("global_explanation", &self.global_explanation),
            ("caption", &self.caption),
        ] {
            if text.trim().is_empty() {
                return bad(format!("{name} is empty"));
            }
        }
        if self
            .local_explanations
            .iter()
            .any(|l| l.text.trim().is_empty())
        {
            return bad("empty local explanation".into());
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::toolbox::AddParams;

    pub(crate) fn sample_record() -> ArtifactRecord {
        let bbox = PixelRect {
            x0: 16,
            y0: 8,
            x1: 32,
            y1: 24,
        };
        ArtifactRecord {
            schema_version: RECORD_SCHEMA_VERSION,
            record_id: "img1-add-0".into(),
            image_id: "img1".into(),
            source_image: "images/img1/clean.png".into(),
            artifact_image: "images/img1/add-0.png".into(),
            mapping_export: "mappings/img1/add-0.json".into(),
            image_width: 64,
            image_height: 64,
            artifact_type: ArtifactType::Duplication,
            entity: "dog".into(),
            subentity: Some("ear".into()),
            target_bboxes: vec![bbox],
            local_explanations: vec![LocalExplanation {
                bbox,
                text: "A second ear grows from the head.".into(),
            }],
            global_explanation: "The dog has three ears.".into(),
            caption: "A dog on grass.".into(),
            grounded: vec![GroundedPart {
                entity: "dog".into(),
                subentity: "ear".into(),
                bbox: PixelRect {
                    x0: 8,
                    y0: 8,
                    x1: 16,
                    y1: 16,
                },
            }],
            seed: 42,
            params: ToolParamsSnapshot::Add(AddParams::default()),
        }
    }

    #[test]
    fn record_round_trip() {
        let r = sample_record();
        r.validate().unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<ArtifactRecord>(&s).unwrap(), r);
    }

    #[test]
    fn record_invariants() {
        let mut r = sample_record();
        r.target_bboxes[0].x1 = 65;
        assert!(r.validate().is_err());
        let mut r = sample_record();
        r.artifact_type = ArtifactType::Omission;
        assert!(r.validate().is_err());
        let mut r = sample_record();
        r.local_explanations.clear();
        assert!(r.validate().is_err());
        let mut r = sample_record();
        r.global_explanation = " ".into();
        assert!(r.validate().is_err());
        let mut r = sample_record();
        r.schema_version = 2;
        assert!(r.validate().is_err());
    }
}
