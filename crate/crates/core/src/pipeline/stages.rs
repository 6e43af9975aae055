use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curation::{
    build_triplet, global_explanation, local_explanation, metric_gate, vlm_filter,
    FilterThresholds, FilterVerdict, GateDecision, LocalExplanation, PerceptualDistance, VlmClient,
    VlmOptions,
};
use crate::dataset::{ArtifactRecord, DatasetError, GroundedPart, RECORD_SCHEMA_VERSION};
use crate::grid::{ArtifactType, PatchMapping, PixelRect};
use crate::injection::{render_pixel_oracle, InjectionError, PixelImage};
use crate::perception::{perceive_manifest, GroundedScene, GroundingThresholds, SceneManifest};
use crate::toolbox::MappingExport;

use super::plan::Job;
use super::PipelineError;

/// A grounded scene plus what later stages need from its manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceivedScene {
    pub image_id: String,
    /// Resolved path of the clean image.
    pub image: PathBuf,
    pub caption: String,
    pub scene: GroundedScene,
}

impl PerceivedScene {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| PipelineError::Stage(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scene serializes");
        s.push('\n');
        s
    }

    pub fn load_image(&self) -> Result<PixelImage, InjectionError> {
        PixelImage::load_png(&self.image)
    }

    /// Every grounded subentity with its pixel box, in scene order.
    pub fn grounded_parts(&self) -> Vec<GroundedPart> {
        let s = &self.scene;
        s.subentities
            .iter()
            .enumerate()
            .filter_map(|(i, sub)| {
                let bbox = sub
                    .instance
                    .bbox
                    .or_else(|| s.grid.bounding_rect(&sub.instance.patches))?;
                Some(GroundedPart {
                    entity: s.parent_of(i).label.clone(),
                    subentity: sub.instance.label.clone(),
                    bbox,
                })
            })
            .collect()
    }
}

pub fn perceive(
    manifest: &Path,
    patch_px: u32,
    thresholds: &GroundingThresholds,
) -> Result<PerceivedScene, crate::Error> {
    let (m, scene) = perceive_manifest(manifest, patch_px, thresholds)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    Ok(PerceivedScene {
        image: SceneManifest::resolve(base, &m.image),
        image_id: m.image_id,
        caption: m.caption,
        scene,
    })
}

/// Pixel-space rendering of a mapping onto the clean image.
pub fn inject(
    clean: &PixelImage,
    mapping: &PatchMapping,
    blend: u32,
) -> Result<PixelImage, InjectionError> {
    render_pixel_oracle(clean, mapping, &mapping.grid(), blend)
}

/// Outcome of the curation stage for one injected image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurationReport {
    pub artifact_type: ArtifactType,
    pub target_bbox: PixelRect,
    pub distance: f64,
    pub gate: GateDecision,
    /// Judge verdict; absent when the metric gate rejected or the type is
    /// distortion.
    pub verdict: Option<FilterVerdict>,
    pub local: Vec<LocalExplanation>,
    pub global: Option<String>,
}

impl CurationReport {
    pub fn accepted(&self) -> bool {
        self.rejection().is_none()
    }

    /// `(stage, reason)` of the rejection, if any.
    pub fn rejection(&self) -> Option<(&'static str, String)> {
        match self.gate {
            GateDecision::Keep => {}
            GateDecision::TooSimilar => return Some(("metric", "too_similar".into())),
            GateDecision::TooDamaged => return Some(("metric", "too_damaged".into())),
        }
        match &self.verdict {
            Some(FilterVerdict::Reject) => Some(("vlm", "judge_said_no".into())),
            Some(FilterVerdict::Unparseable { .. }) => Some(("vlm", "unparseable_reply".into())),
            _ if self.global.is_none() => Some(("vlm", "no_explanation".into())),
            _ => None,
        }
    }
}

/// Metric gate, judge filter (all types but distortion), then local and
/// global explanations. Judge calls stop at the first rejection.
#[allow(clippy::too_many_arguments)]
pub fn curate(
    clean: &PixelImage,
    artifact: &PixelImage,
    mapping: &PatchMapping,
    entity: &str,
    thresholds: &FilterThresholds,
    metric: &dyn PerceptualDistance,
    client: &dyn VlmClient,
    opts: &VlmOptions,
) -> Result<CurationReport, crate::Error> {
    let bbox = mapping
        .target_bbox()
        .ok_or_else(|| PipelineError::Stage("cannot curate an empty mapping".into()))?;
    let artifact_type = mapping.tool().artifact_type();
    let triplet = build_triplet(clean, artifact, bbox, entity)?;
    let distance = metric.distance(&triplet.cropped_original, &triplet.cropped_artifact)?;
    let mut report = CurationReport {
        artifact_type,
        target_bbox: bbox,
        distance,
        gate: metric_gate(distance, thresholds),
        verdict: None,
        local: Vec::new(),
        global: None,
    };
    if report.gate != GateDecision::Keep {
        return Ok(report);
    }
    if artifact_type != ArtifactType::Distortion {
        let verdict = vlm_filter(&triplet, artifact_type, client, opts)?;
        let keep = verdict.keeps();
        report.verdict = Some(verdict);
        if !keep {
            return Ok(report);
        }
    }
    let text = local_explanation(&triplet, artifact_type, client, opts)?;
    report.global = Some(global_explanation(
        artifact,
        &[(bbox, text.clone())],
        client,
        opts,
    )?);
    report.local.push(LocalExplanation { bbox, text });
    Ok(report)
}

/// Where a record's files live, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordPaths {
    pub source_image: String,
    pub artifact_image: String,
    pub mapping_export: String,
}

/// Assembles and validates the record for an accepted injection.
pub fn build_record(
    scene: &PerceivedScene,
    job: &Job,
    export: &MappingExport,
    report: &CurationReport,
    paths: RecordPaths,
) -> Result<ArtifactRecord, DatasetError> {
    let global = match (&report.global, report.rejection()) {
        (Some(g), None) => g.clone(),
        (_, reason) => {
            return Err(DatasetError::Invalid(format!(
                "{}: curation did not accept ({reason:?})",
                job.record_id()
            )))
        }
    };
    let record = ArtifactRecord {
        schema_version: RECORD_SCHEMA_VERSION,
        record_id: job.record_id(),
        image_id: scene.image_id.clone(),
        source_image: paths.source_image,
        artifact_image: paths.artifact_image,
        mapping_export: paths.mapping_export,
        image_width: scene.scene.grid.width_px(),
        image_height: scene.scene.grid.height_px(),
        artifact_type: export.artifact_type,
        entity: job.entity.clone(),
        subentity: job.subentity.clone(),
        target_bboxes: vec![report.target_bbox],
        local_explanations: report.local.clone(),
        global_explanation: global,
        caption: scene.caption.clone(),
        grounded: scene.grounded_parts(),
        seed: export.seed,
        params: export.params,
    };
    record.validate()?;
    Ok(record)
}
