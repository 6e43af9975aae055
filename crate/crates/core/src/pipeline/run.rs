use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::curation::{PatchRmsDistance, RecordingClient, VlmClient};
use crate::dataset::{emit_vqa_artifact, emit_vqa_clean, ArtifactRecord, JsonlWriter, VqaSample};
use crate::grid::ArtifactType;
use crate::toolbox::MappingExport;

use super::config::{ClientKind, CorpusManifest, PipelineConfig};
use super::plan::{plan_jobs, synthesize, Job};
use super::stages::{build_record, curate, inject, perceive, PerceivedScene, RecordPaths};
use super::{write_file, PipelineError};

/// Counts for one run. Every attempted job ends in exactly one of emitted,
/// filtered by metric, filtered by the judge, or failed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub images_total: usize,
    pub images_succeeded: usize,
    pub attempted: usize,
    pub injected: usize,
    pub filtered_metric: usize,
    pub filtered_vlm: usize,
    pub failed: usize,
    pub emitted: usize,
    pub emitted_by_type: BTreeMap<ArtifactType, usize>,
}

impl RunSummary {
    pub fn is_consistent(&self) -> bool {
        self.attempted == self.emitted + self.filtered_metric + self.filtered_vlm + self.failed
            && self.injected <= self.attempted
            && self.emitted + self.filtered_metric + self.filtered_vlm <= self.injected
            && self.emitted_by_type.values().sum::<usize>() == self.emitted
            && self.images_succeeded <= self.images_total
    }

    fn absorb(&mut self, other: &RunSummary) {
        self.attempted += other.attempted;
        self.injected += other.injected;
        self.filtered_metric += other.filtered_metric;
        self.filtered_vlm += other.filtered_vlm;
        self.failed += other.failed;
        self.emitted += other.emitted;
        for (t, n) in &other.emitted_by_type {
            *self.emitted_by_type.entry(*t).or_default() += n;
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

/// One line of `events.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunEvent {
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub job: Option<String>,
    pub stage: String,
    pub decision: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Default)]
struct ImageOutcome {
    ok: bool,
    counts: RunSummary,
    events: Vec<RunEvent>,
    records: Vec<ArtifactRecord>,
}

impl ImageOutcome {
    fn event(
        &mut self,
        image_id: &str,
        job: Option<&Job>,
        stage: &str,
        decision: &str,
        reason: Option<String>,
    ) {
        let ev = RunEvent {
            image_id: image_id.to_string(),
            job: job.map(|j| j.job_id.clone()),
            stage: stage.into(),
            decision: decision.into(),
            reason,
        };
        if decision == "error" {
            warn!(
                image_id,
                job = ev.job.as_deref(),
                stage,
                decision,
                reason = ev.reason.as_deref(),
                "pipeline event"
            );
        } else {
            info!(
                image_id,
                job = ev.job.as_deref(),
                stage,
                decision,
                reason = ev.reason.as_deref(),
                "pipeline event"
            );
        }
        self.events.push(ev);
    }
}

const MANAGED: [&str; 7] = [
    "images",
    "mappings",
    "records.jsonl",
    "vqa_clean.jsonl",
    "vqa_artifact.jsonl",
    "events.jsonl",
    "summary.json",
];

/// Removes outputs of an earlier run so stale files never mix in.
fn prepare_output_dir(dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    for name in MANAGED {
        let p = dir.join(name);
        let res = if p.is_dir() {
            std::fs::remove_dir_all(&p)
        } else {
            std::fs::remove_file(&p)
        };
        match res {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => {
                return Err(PipelineError::io(&p, e))
            }
            _ => {}
        }
    }
    Ok(())
}

/// Runs the configured client over the corpus. With an `http` client and a
/// `transcript` path, every reply is recorded there for later replay.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunSummary, crate::Error> {
    cfg.validate()?;
    let client = cfg.client.build()?;
    match (&cfg.client.kind, &cfg.client.transcript) {
        (ClientKind::Http, Some(path)) => {
            let rec = RecordingClient::new(&*client);
            let summary = run_pipeline_with(cfg, &rec)?;
            rec.transcript().save(path)?;
            Ok(summary)
        }
        _ => run_pipeline_with(cfg, &*client),
    }
}

/// [`run_pipeline`] with a caller-provided judge client.
pub fn run_pipeline_with(
    cfg: &PipelineConfig,
    client: &dyn VlmClient,
) -> Result<RunSummary, crate::Error> {
    cfg.validate()?;
    let corpus = CorpusManifest::load(&cfg.input)?;
    let out = &cfg.output_dir;
    prepare_output_dir(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;

    let perceived: Vec<Result<PerceivedScene, String>> = pool.install(|| {
        corpus
            .scenes
            .par_iter()
            .map(|p| perceive(p, cfg.patch_px, &cfg.grounding).map_err(|e| e.to_string()))
            .collect()
    });
    let mut seen = BTreeSet::new();
    let perceived: Vec<(String, Result<PerceivedScene, String>)> = perceived
        .into_iter()
        .enumerate()
        .map(|(i, r)| match r {
            Ok(s) if !seen.insert(s.image_id.clone()) => (
                s.image_id.clone(),
                Err(format!("duplicate image_id `{}` (scene {i})", s.image_id)),
            ),
            Ok(s) => (s.image_id.clone(), Ok(s)),
            Err(e) => (format!("scene-{i}"), Err(e)),
        })
        .collect();

    let outcomes: Vec<ImageOutcome> = pool.install(|| {
        perceived
            .par_iter()
            .map(|(id, r)| match r {
                Ok(scene) => process_image(cfg, scene, client, out),
                Err(e) => {
                    let mut o = ImageOutcome::default();
                    o.event(id, None, "perceive", "error", Some(e.clone()));
                    o
                }
            })
            .collect()
    });

    let mut summary = RunSummary {
        images_total: corpus.scenes.len(),
        ..Default::default()
    };
    let mut events = JsonlWriter::<RunEvent>::create(&out.join("events.jsonl"))?;
    let mut records = JsonlWriter::<ArtifactRecord>::create(&out.join("records.jsonl"))?;
    let mut vqa_clean = JsonlWriter::<VqaSample>::create(&out.join("vqa_clean.jsonl"))?;
    let mut vqa_artifact = JsonlWriter::<VqaSample>::create(&out.join("vqa_artifact.jsonl"))?;
    for o in &outcomes {
        summary.absorb(&o.counts);
        summary.images_succeeded += o.ok as usize;
        for e in &o.events {
            events.append(e)?;
        }
        if let Some(first) = o.records.first() {
            vqa_clean.append(&emit_vqa_clean(first))?;
        }
        for r in &o.records {
            records.append(r)?;
            vqa_artifact.append(&emit_vqa_artifact(r))?;
        }
    }
    events.finish()?;
    records.finish()?;
    vqa_clean.finish()?;
    vqa_artifact.finish()?;
    debug_assert!(summary.is_consistent(), "{summary:?}");
    write_file(&out.join("summary.json"), summary.to_json())?;
    info!(
        attempted = summary.attempted,
        injected = summary.injected,
        filtered_metric = summary.filtered_metric,
        filtered_vlm = summary.filtered_vlm,
        failed = summary.failed,
        emitted = summary.emitted,
        "run finished"
    );
    Ok(summary)
}

fn process_image(
    cfg: &PipelineConfig,
    scene: &PerceivedScene,
    client: &dyn VlmClient,
    out: &Path,
) -> ImageOutcome {
    let id = scene.image_id.as_str();
    let mut o = ImageOutcome::default();
    o.event(
        id,
        None,
        "perceive",
        "ok",
        Some(format!(
            "{} subentities grounded",
            scene.scene.subentities.len()
        )),
    );
    for d in &scene.scene.dropped {
        o.event(
            id,
            None,
            "perceive",
            "dropped",
            Some(format!("{}: {}", d.label, d.reason)),
        );
    }
    let clean = match scene.load_image() {
        Ok(img) => img,
        Err(e) => {
            o.event(id, None, "perceive", "error", Some(e.to_string()));
            return o;
        }
    };
    let jobs = plan_jobs(id, &scene.scene, &cfg.tools, cfg.expand_all_tools, cfg.seed);
    if jobs.is_empty() {
        o.event(
            id,
            None,
            "plan",
            "skip",
            Some("no candidates for the enabled tools".into()),
        );
    }
    let metric = PatchRmsDistance {
        patch_px: cfg.patch_px,
    };
    let opts = cfg.client.options();
    for job in &jobs {
        o.counts.attempted += 1;
        let rel_mapping = format!("mappings/{id}/{}.json", job.job_id);
        let rel_artifact = format!("images/{id}/{}.png", job.job_id);
        let result = (|| -> Result<Option<ArtifactRecord>, String> {
            let (mapping, snapshot) = synthesize(&scene.scene, job, &cfg.params)
                .map_err(|e| format!("synthesize: {e}"))?;
            if mapping.is_empty() {
                return Err("synthesize: empty mapping".into());
            }
            let export = MappingExport::new(
                &mapping,
                job.seed,
                cfg.schedule.snapshot(mapping.tool().artifact_type()),
                snapshot,
            )
            .map_err(|e| format!("export: {e}"))?;
            write_file(&out.join(&rel_mapping), export.to_json()).map_err(|e| e.to_string())?;
            let artifact =
                inject(&clean, &mapping, cfg.blend).map_err(|e| format!("inject: {e}"))?;
            o.counts.injected += 1;
            o.event(
                id,
                Some(job),
                "inject",
                "ok",
                Some(format!("{} pairs", mapping.len())),
            );
            let report = curate(
                &clean,
                &artifact,
                &mapping,
                &job.prompt_entity(),
                &cfg.thresholds,
                &metric,
                client,
                &opts,
            )
            .map_err(|e| format!("curate: {e}"))?;
            if let Some((stage, reason)) = report.rejection() {
                if stage == "metric" {
                    o.counts.filtered_metric += 1;
                } else {
                    o.counts.filtered_vlm += 1;
                }
                o.event(
                    id,
                    Some(job),
                    stage,
                    "reject",
                    Some(format!("{reason} (d={:.6})", report.distance)),
                );
                return Ok(None);
            }
            o.event(
                id,
                Some(job),
                "curate",
                "keep",
                Some(format!("d={:.6}", report.distance)),
            );
            let paths = RecordPaths {
                source_image: format!("images/{id}/clean.png"),
                artifact_image: rel_artifact.clone(),
                mapping_export: rel_mapping.clone(),
            };
            let record = build_record(scene, job, &export, &report, paths)
                .map_err(|e| format!("emit: {e}"))?;
            write_file(&out.join(&rel_artifact), artifact.to_png_bytes())
                .map_err(|e| format!("emit: {e}"))?;
            Ok(Some(record))
        })();
        match result {
            Ok(Some(record)) => {
                o.counts.emitted += 1;
                *o.counts
                    .emitted_by_type
                    .entry(record.artifact_type)
                    .or_default() += 1;
                o.event(id, Some(job), "emit", "ok", None);
                o.records.push(record);
            }
            Ok(None) => {}
            Err(reason) => {
                o.counts.failed += 1;
                o.event(id, Some(job), "job", "error", Some(reason));
            }
        }
    }
    if !o.records.is_empty() {
        let dst = out.join(format!("images/{id}/clean.png"));
        if let Err(e) = write_file(&dst, clean.to_png_bytes()) {
            o.event(id, None, "emit", "error", Some(e.to_string()));
            return o;
        }
    }
    o.ok = jobs.is_empty() || o.counts.failed < jobs.len();
    o
}
