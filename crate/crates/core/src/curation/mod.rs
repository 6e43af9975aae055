//! Quality gates and explanations for injected pairs.

mod client;
mod http;
mod prompts;
mod vlm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::PixelRect;
use crate::injection::PixelImage;

pub use client::{
    call_with_retry, request_key, MockVlmClient, RecordingClient, ReplayClient, RetryPolicy,
    Transcript, TransportError, VlmClient, VlmRequest, VlmTask,
};
pub use http::{HttpEmbedder, HttpVlmClient, API_KEY_ENV};
pub use prompts::{
    artifact_type_description, render_filter_prompt, render_global_prompt, render_local_prompt,
    PROMPT_VERSION,
};
pub use vlm::{
    global_explanation, local_explanation, parse_yes_no, vlm_filter, FilterVerdict, VlmOptions,
};

/// Fill colour for the blanked target region of a triplet.
pub const MASK_FILL: [u8; 3] = [128, 128, 128];

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("client call failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("client returned an empty reply")]
    EmptyReply,
    #[error("invalid curation input: {0}")]
    InvalidInput(String),
    #[error("transcript: {0}")]
    Transcript(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterThresholds {
    pub tau1: f64,
    pub tau2: f64,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        Self {
            tau1: 0.5,
            tau2: 0.9,
        }
    }
}

impl FilterThresholds {
    pub fn validate(&self) -> Result<(), CurationError> {
        if !(0.0 <= self.tau1 && self.tau1 < self.tau2 && self.tau2 <= 1.0) {
            return Err(CurationError::InvalidInput(format!(
                "thresholds need 0 <= tau1 < tau2 <= 1, got {} and {}",
                self.tau1, self.tau2
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateDecision {
    Keep,
    TooSimilar,
    TooDamaged,
}

/// Keeps a pair iff `tau1 <= 1 - d <= tau2`.
///
/// A NaN distance is treated as too damaged.
pub fn metric_gate(d: f64, thresholds: &FilterThresholds) -> GateDecision {
    let s = 1.0 - d;
    if s > thresholds.tau2 {
        GateDecision::TooSimilar
    } else if s >= thresholds.tau1 {
        GateDecision::Keep
    } else {
        GateDecision::TooDamaged
    }
}

/// Perceptual distance between two equally sized crops.
pub trait PerceptualDistance: Send + Sync {
    fn distance(&self, a: &PixelImage, b: &PixelImage) -> Result<f64, CurationError>;
}

/// Mean over `patch_px` tiles of the RMS channel difference scaled to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchRmsDistance {
    pub patch_px: u32,
}

impl PerceptualDistance for PatchRmsDistance {
    fn distance(&self, a: &PixelImage, b: &PixelImage) -> Result<f64, CurationError> {
        if (a.width(), a.height()) != (b.width(), b.height()) {
            return Err(CurationError::InvalidInput(format!(
                "crop sizes differ: {}x{} vs {}x{}",
                a.width(),
                a.height(),
                b.width(),
                b.height()
            )));
        }
        if a.width() == 0 || a.height() == 0 || self.patch_px == 0 {
            return Err(CurationError::InvalidInput(
                "empty crop or zero patch size".into(),
            ));
        }
        let p = self.patch_px;
        let mut total = 0.0;
        let mut tiles = 0usize;
        for ty in (0..a.height()).step_by(p as usize) {
            for tx in (0..a.width()).step_by(p as usize) {
                let mut sq = 0.0;
                let mut n = 0usize;
                for y in ty..(ty + p).min(a.height()) {
                    for x in tx..(tx + p).min(a.width()) {
                        let (pa, pb) = (a.get(x, y), b.get(x, y));
                        for c in 0..3 {
                            let diff = (pa[c] as f64 - pb[c] as f64) / 255.0;
                            sq += diff * diff;
                        }
                        n += 3;
                    }
                }
                total += (sq / n as f64).sqrt();
                tiles += 1;
            }
        }
        Ok(total / tiles as f64)
    }
}

/// The three views a judge sees for one injected region.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub masked_original: PixelImage,
    pub cropped_original: PixelImage,
    pub cropped_artifact: PixelImage,
    pub region: PixelRect,
    pub entity_name: String,
}

pub fn build_triplet(
    original: &PixelImage,
    artifact: &PixelImage,
    target_bbox: PixelRect,
    entity_name: &str,
) -> Result<Triplet, CurationError> {
    if (original.width(), original.height()) != (artifact.width(), artifact.height()) {
        return Err(CurationError::InvalidInput(
            "original and artifact sizes differ".into(),
        ));
    }
    if target_bbox.is_empty() || !target_bbox.within(original.width(), original.height()) {
        return Err(CurationError::InvalidInput(format!(
            "bbox {target_bbox} outside {}x{}",
            original.width(),
            original.height()
        )));
    }
    let crop = |img: &PixelImage| {
        img.crop(target_bbox)
            .map_err(|e| CurationError::InvalidInput(e.to_string()))
    };
    let mut masked_original = original.clone();
    masked_original.fill_rect(target_bbox, MASK_FILL);
    Ok(Triplet {
        masked_original,
        cropped_original: crop(original)?,
        cropped_artifact: crop(artifact)?,
        region: target_bbox,
        entity_name: entity_name.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalExplanation {
    pub bbox: PixelRect,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplanationRecord {
    pub local: Vec<LocalExplanation>,
    pub global: String,
    pub caption: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_examples() {
        let t = FilterThresholds::default();
        assert_eq!(metric_gate(0.30, &t), GateDecision::Keep);
        assert_eq!(metric_gate(0.05, &t), GateDecision::TooSimilar);
        assert_eq!(metric_gate(0.60, &t), GateDecision::TooDamaged);
        assert_eq!(metric_gate(0.1, &t), GateDecision::Keep);
        assert_eq!(metric_gate(0.5, &t), GateDecision::Keep);
        assert_eq!(metric_gate(f64::NAN, &t), GateDecision::TooDamaged);
    }

    #[test]
    fn threshold_validation() {
        assert!(FilterThresholds::default().validate().is_ok());
        assert!(FilterThresholds {
            tau1: 0.9,
            tau2: 0.5
        }
        .validate()
        .is_err());
        assert!(FilterThresholds {
            tau1: -0.1,
            tau2: 0.5
        }
        .validate()
        .is_err());
    }

    fn gradient(w: u32, h: u32, k: u32) -> PixelImage {
        PixelImage::from_fn(w, h, |x, y| {
            [
                (x * k % 256) as u8,
                (y * k % 256) as u8,
                ((x ^ y) % 256) as u8,
            ]
        })
    }

    #[test]
    fn triplet_whole_image() {
        let a = gradient(8, 6, 3);
        let b = gradient(8, 6, 5);
        let r = PixelRect {
            x0: 0,
            y0: 0,
            x1: 8,
            y1: 6,
        };
        let t = build_triplet(&a, &b, r, "dog").unwrap();
        assert_eq!(t.masked_original, PixelImage::filled(8, 6, MASK_FILL));
        assert_eq!(t.cropped_original, a);
        assert_eq!(t.cropped_artifact, b);
    }

    #[test]
    fn triplet_sub_block() {
        let a = gradient(32, 32, 7);
        let b = gradient(32, 32, 11);
        let r = PixelRect {
            x0: 8,
            y0: 8,
            x1: 24,
            y1: 24,
        };
        let t = build_triplet(&a, &b, r, "cat").unwrap();
        assert_eq!(
            (t.cropped_original.width(), t.cropped_original.height()),
            (16, 16)
        );
        for y in 0..16 {
            for x in 0..16 {
                assert_eq!(t.cropped_original.get(x, y), a.get(x + 8, y + 8));
                assert_eq!(t.cropped_artifact.get(x, y), b.get(x + 8, y + 8));
            }
        }
        for y in 0..32 {
            for x in 0..32 {
                let want = if r.contains_px(x, y) {
                    MASK_FILL
                } else {
                    a.get(x, y)
                };
                assert_eq!(t.masked_original.get(x, y), want);
            }
        }
        let same = build_triplet(&a, &a, r, "cat").unwrap();
        assert_eq!(same.cropped_original.data(), same.cropped_artifact.data());
    }

    #[test]
    fn triplet_errors() {
        let a = gradient(8, 8, 1);
        assert!(build_triplet(
            &a,
            &a,
            PixelRect {
                x0: 4,
                y0: 4,
                x1: 9,
                y1: 8
            },
            "x"
        )
        .is_err());
        assert!(build_triplet(
            &a,
            &gradient(8, 7, 1),
            PixelRect {
                x0: 0,
                y0: 0,
                x1: 2,
                y1: 2
            },
            "x"
        )
        .is_err());
    }

    #[test]
    fn patch_rms_distance() {
        let d = PatchRmsDistance { patch_px: 2 };
        let black = PixelImage::filled(4, 4, [0, 0, 0]);
        let white = PixelImage::filled(4, 4, [255, 255, 255]);
        assert_eq!(d.distance(&black, &black).unwrap(), 0.0);
        assert_eq!(d.distance(&black, &white).unwrap(), 1.0);
        // One of four tiles fully white.
        let mut mixed = black.clone();
        mixed.fill_rect(
            PixelRect {
                x0: 0,
                y0: 0,
                x1: 2,
                y1: 2,
            },
            [255, 255, 255],
        );
        assert!((d.distance(&black, &mixed).unwrap() - 0.25).abs() < 1e-15);
        assert!(d.distance(&black, &PixelImage::new(3, 4)).is_err());
    }
}
