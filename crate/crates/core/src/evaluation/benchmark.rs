use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::ArtifactRecord;
use crate::grid::PixelRect;

use super::metrics::{binary_metrics, BinaryScores, PixelCounts};
use super::raster::{rasterize_all, RegionAnnotation};
use super::text::{css, rouge_l, Embedder};
use super::EvalError;

/// Ground truth for one benchmark image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkEntry {
    pub image: String,
    pub width: u32,
    pub height: u32,
    pub label: bool,
    #[serde(default)]
    pub bboxes: Vec<PixelRect>,
    #[serde(default)]
    pub explanation: String,
}

impl BenchmarkEntry {
    pub fn validate(&self) -> Result<(), EvalError> {
        if let Some(b) = self
            .bboxes
            .iter()
            .find(|b| b.x0 > b.x1 || b.y0 > b.y1 || !b.within(self.width, self.height))
        {
            return Err(EvalError::Geometry(format!(
                "{}: bbox {b} outside {}x{}",
                self.image, self.width, self.height
            )));
        }
        if !self.label && !self.bboxes.is_empty() {
            return Err(EvalError::Geometry(format!(
                "{}: negative entry with bboxes",
                self.image
            )));
        }
        Ok(())
    }
}

/// A model's answer for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prediction {
    pub image: String,
    pub label: bool,
    #[serde(default)]
    pub regions: Vec<RegionAnnotation>,
    #[serde(default)]
    pub explanation: String,
}

/// How per-image localization scores are combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Mean of per-image IoU/F1.
    #[default]
    PerImageMean,
    /// IoU/F1 of pixel counts summed over all images.
    Micro,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalOptions {
    pub heat_threshold: f64,
    pub aggregation: Aggregation,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            heat_threshold: 0.5,
            aggregation: Aggregation::PerImageMean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub image: String,
    pub gt_label: bool,
    pub pred_label: bool,
    pub missing_prediction: bool,
    pub iou: Option<f64>,
    pub f1: Option<f64>,
    pub rouge_l: Option<f64>,
    pub css: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationSummary {
    pub n: usize,
    pub aggregation: Aggregation,
    pub iou: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationSummary {
    pub n: usize,
    pub rouge_l: f64,
    pub css: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_samples: usize,
    pub binary: BinaryScores,
    pub localization: Option<LocalizationSummary>,
    pub explanation: Option<ExplanationSummary>,
    pub samples: Vec<SampleRow>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Scores predictions against a benchmark.
///
/// Images without a prediction count as a "no" with no regions and no text.
/// Localization and explanation are scored on positive entries only; the
/// explanation additionally needs a non-empty reference.
pub fn evaluate(
    gt: &[BenchmarkEntry],
    preds: &[Prediction],
    opts: &EvalOptions,
    embedder: Option<&dyn Embedder>,
) -> Result<EvalReport, EvalError> {
    if gt.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut by_image: BTreeMap<&str, &Prediction> = BTreeMap::new();
    for p in preds {
        if by_image.insert(p.image.as_str(), p).is_some() {
            return Err(EvalError::Manifest(format!(
                "duplicate prediction for {}",
                p.image
            )));
        }
    }
    let mut seen = BTreeSet::new();
    let mut rows = Vec::with_capacity(gt.len());
    let (mut pl, mut gl) = (Vec::new(), Vec::new());
    let mut loc_counts = PixelCounts::default();
    let (mut ious, mut f1s, mut rouges, mut csss) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for e in gt {
        e.validate()?;
        if !seen.insert(e.image.as_str()) {
            return Err(EvalError::Manifest(format!(
                "duplicate benchmark entry for {}",
                e.image
            )));
        }
        let pred = by_image.get(e.image.as_str()).copied();
        let pred_label = pred.is_some_and(|p| p.label);
        pl.push(pred_label);
        gl.push(e.label);
        let mut row = SampleRow {
            image: e.image.clone(),
            gt_label: e.label,
            pred_label,
            missing_prediction: pred.is_none(),
            iou: None,
            f1: None,
            rouge_l: None,
            css: None,
        };
        if e.label {
            let regions: Vec<RegionAnnotation> = e
                .bboxes
                .iter()
                .map(|b| RegionAnnotation::bbox(e.width, e.height, *b))
                .collect();
            let gt_map = rasterize_all(&regions, e.width, e.height, opts.heat_threshold)?;
            let pred_regions = pred.map(|p| p.regions.as_slice()).unwrap_or(&[]);
            if let Some(r) = pred_regions
                .iter()
                .find(|r| (r.width, r.height) != (e.width, e.height))
            {
                return Err(EvalError::Dimensions(format!(
                    "{}: region is {}x{}, image is {}x{}",
                    e.image, r.width, r.height, e.width, e.height
                )));
            }
            let pred_map = rasterize_all(pred_regions, e.width, e.height, opts.heat_threshold)?;
            let counts = PixelCounts::between(&pred_map, &gt_map)?;
            loc_counts = loc_counts + counts;
            let s = counts.scores();
            ious.push(s.iou);
            f1s.push(s.f1);
            row.iou = Some(s.iou);
            row.f1 = Some(s.f1);
            if !e.explanation.trim().is_empty() {
                let text = pred.map(|p| p.explanation.as_str()).unwrap_or("");
                let r = rouge_l(text, &e.explanation);
                rouges.push(r);
                row.rouge_l = Some(r);
                if let Some(emb) = embedder {
                    let c = if text.trim().is_empty() {
                        0.0
                    } else {
                        css(text, &e.explanation, emb)?
                    };
                    csss.push(c);
                    row.css = Some(c);
                }
            }
        }
        rows.push(row);
    }
    let localization = (!ious.is_empty()).then(|| {
        let (iou, f1) = match opts.aggregation {
            Aggregation::PerImageMean => (mean(&ious), mean(&f1s)),
            Aggregation::Micro => {
                let s = loc_counts.scores();
                (s.iou, s.f1)
            }
        };
        LocalizationSummary {
            n: ious.len(),
            aggregation: opts.aggregation,
            iou,
            f1,
        }
    });
    let explanation = (!rouges.is_empty()).then(|| ExplanationSummary {
        n: rouges.len(),
        rouge_l: mean(&rouges),
        css: (!csss.is_empty()).then(|| mean(&csss)),
    });
    Ok(EvalReport {
        n_samples: gt.len(),
        binary: binary_metrics(&pl, &gl)?,
        localization,
        explanation,
        samples: rows,
    })
}

/// Benchmark entries derived from emitted records: each source image once
/// as a negative, each artifact image as a positive.
pub fn benchmark_from_records(records: &[ArtifactRecord]) -> Vec<BenchmarkEntry> {
    let mut out = Vec::new();
    let mut sources = BTreeSet::new();
    for r in records {
        if sources.insert(r.source_image.clone()) {
            out.push(BenchmarkEntry {
                image: r.source_image.clone(),
                width: r.image_width,
                height: r.image_height,
                label: false,
                bboxes: Vec::new(),
                explanation: String::new(),
            });
        }
        out.push(BenchmarkEntry {
            image: r.artifact_image.clone(),
            width: r.image_width,
            height: r.image_height,
            label: true,
            bboxes: r.target_bboxes.clone(),
            explanation: r.global_explanation.clone(),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::Region;

    fn entry(image: &str, label: bool, bboxes: Vec<PixelRect>, expl: &str) -> BenchmarkEntry {
        BenchmarkEntry {
            image: image.into(),
            width: 4,
            height: 4,
            label,
            bboxes,
            explanation: expl.into(),
        }
    }

    fn r(x0: u32, y0: u32, x1: u32, y1: u32) -> PixelRect {
        PixelRect { x0, y0, x1, y1 }
    }

    #[test]
    fn end_to_end_scores() {
        let gt = vec![
            entry("a", true, vec![r(0, 0, 2, 2)], "the cat sat"),
            entry("b", false, vec![], ""),
            entry("c", true, vec![r(0, 0, 4, 4)], "x"),
        ];
        let preds = vec![
            Prediction {
                image: "a".into(),
                label: true,
                regions: vec![RegionAnnotation::bbox(4, 4, r(1, 1, 3, 3))],
                explanation: "the dog sat".into(),
            },
            Prediction {
                image: "b".into(),
                label: true,
                regions: vec![],
                explanation: String::new(),
            },
        ];
        let rep = evaluate(&gt, &preds, &EvalOptions::default(), None).unwrap();
        assert_eq!(rep.n_samples, 3);
        // preds: yes, yes, no(missing); gts: yes, no, yes.
        assert!((rep.binary.accuracy - 1.0 / 3.0).abs() < 1e-15);
        let loc = rep.localization.unwrap();
        assert_eq!(loc.n, 2);
        assert!((loc.iou - (1.0 / 7.0) / 2.0).abs() < 1e-15);
        assert!((loc.f1 - 0.25 / 2.0).abs() < 1e-15);
        let ex = rep.explanation.unwrap();
        assert!((ex.rouge_l - (2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert!(rep.samples[2].missing_prediction);

        let micro = evaluate(
            &gt,
            &preds,
            &EvalOptions {
                aggregation: Aggregation::Micro,
                ..Default::default()
            },
            None,
        )
        .unwrap();
        // TP 1, FP 3, FN 3 + 16.
        let l = micro.localization.unwrap();
        assert!((l.iou - 1.0 / 23.0).abs() < 1e-15);
    }

    #[test]
    fn heatmap_predictions() {
        let gt = vec![entry("a", true, vec![r(0, 0, 4, 2)], "")];
        let mut values = vec![0.0; 16];
        values[..8].iter_mut().for_each(|v| *v = 0.7);
        let preds = vec![Prediction {
            image: "a".into(),
            label: true,
            regions: vec![RegionAnnotation {
                width: 4,
                height: 4,
                region: Region::Heatmap { values },
            }],
            explanation: String::new(),
        }];
        let rep = evaluate(&gt, &preds, &EvalOptions::default(), None).unwrap();
        assert_eq!(rep.localization.unwrap().iou, 1.0);
        assert!(rep.explanation.is_none());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            evaluate(&[], &[], &EvalOptions::default(), None),
            Err(EvalError::Empty)
        ));
        let dup = vec![entry("a", false, vec![], ""), entry("a", false, vec![], "")];
        assert!(evaluate(&dup, &[], &EvalOptions::default(), None).is_err());
        let oob = vec![entry("a", true, vec![r(0, 0, 5, 1)], "")];
        assert!(evaluate(&oob, &[], &EvalOptions::default(), None).is_err());
    }
}
