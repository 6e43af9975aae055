use serde::{Deserialize, Serialize};

use crate::grid::PixelRect;

use super::ArtifactRecord;

pub const VQA_SCHEMA_VERSION: u32 = 1;

// Frozen template text.
const Q_BINARY: &str = "Does this image contain any visual artifacts?";
const A_BINARY_CLEAN: &str = "No.";
const A_BINARY_ARTIFACT: &str = "Yes.";
const Q_CLEAN_LOCATE: &str = "Locate the {entity}'s {subentity}.";
const Q_CLEAN_PRESENCE: &str = "Is there a {entity}'s {subentity} in {bbox}?";
const A_PRESENT: &str = "Yes";
const Q_CLEAN_DESCRIBE: &str = "Describe the clean image.";
const Q_ARTIFACT_BOXES: &str = "Provide bounding boxes for all artifact regions.";
const Q_ARTIFACT_REGION: &str = "Explain why region {bbox} is an artifact.";
const Q_ARTIFACT_DESCRIBE: &str = "Describe all artifacts in the image.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Clean,
    Artifact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VqaTask {
    Binary,
    Locate,
    Region,
    Explain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VqaTurn {
    pub task: VqaTask,
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VqaSample {
    pub schema_version: u32,
    pub sample_id: String,
    pub image: String,
    pub split: Split,
    pub turns: Vec<VqaTurn>,
}

/// `[x_min, y_min, x_max, y_max]`.
pub fn format_bbox(b: &PixelRect) -> String {
    b.to_string()
}

/// `[[...], [...]]`.
pub fn format_bbox_list(boxes: &[PixelRect]) -> String {
    let inner: Vec<String> = boxes.iter().map(format_bbox).collect();
    format!("[{}]", inner.join(", "))
}

fn turn(task: VqaTask, question: String, answer: impl Into<String>) -> VqaTurn {
    VqaTurn {
        task,
        question,
        answer: answer.into(),
    }
}

/// Conversation about the clean source image: the binary question, a
/// locate/presence pair per grounded subentity, then the caption.
pub fn emit_vqa_clean(record: &ArtifactRecord) -> VqaSample {
    let mut turns = vec![turn(VqaTask::Binary, Q_BINARY.into(), A_BINARY_CLEAN)];
    for part in &record.grounded {
        let bbox = format_bbox(&part.bbox);
        let fill = |t: &str| {
            t.replace("{entity}", &part.entity)
                .replace("{subentity}", &part.subentity)
                .replace("{bbox}", &bbox)
        };
        turns.push(turn(VqaTask::Locate, fill(Q_CLEAN_LOCATE), bbox.clone()));
        turns.push(turn(VqaTask::Region, fill(Q_CLEAN_PRESENCE), A_PRESENT));
    }
    turns.push(turn(
        VqaTask::Explain,
        Q_CLEAN_DESCRIBE.into(),
        record.caption.clone(),
    ));
    VqaSample {
        schema_version: VQA_SCHEMA_VERSION,
        sample_id: format!("{}-clean", record.image_id),
        image: record.source_image.clone(),
        split: Split::Clean,
        turns,
    }
}

/// Conversation about the artifact image: binary, all boxes, one
/// explanation turn per box, then the global explanation.
pub fn emit_vqa_artifact(record: &ArtifactRecord) -> VqaSample {
    let mut turns = vec![
        turn(VqaTask::Binary, Q_BINARY.into(), A_BINARY_ARTIFACT),
        turn(
            VqaTask::Locate,
            Q_ARTIFACT_BOXES.into(),
            format_bbox_list(&record.target_bboxes),
        ),
    ];
    for b in &record.target_bboxes {
        let label = record
            .local_explanations
            .iter()
            .find(|l| l.bbox == *b)
            .map(|l| l.text.clone())
            .unwrap_or_default();
        turns.push(turn(
            VqaTask::Region,
            Q_ARTIFACT_REGION.replace("{bbox}", &format_bbox(b)),
            label,
        ));
    }
    turns.push(turn(
        VqaTask::Explain,
        Q_ARTIFACT_DESCRIBE.into(),
        record.global_explanation.clone(),
    ));
    VqaSample {
        schema_version: VQA_SCHEMA_VERSION,
        sample_id: format!("{}-artifact", record.record_id),
        image: record.artifact_image.clone(),
        split: Split::Artifact,
        turns,
    }
}
