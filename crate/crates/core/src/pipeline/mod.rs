//! End-to-end orchestration: perceive, synthesize, inject, curate, emit.
//!
//! Every stage is a plain function over files or in-memory values so the
//! command line can run them one at a time. [`run_pipeline`] chains them
//! over a corpus and writes a deterministic output tree:
//!
//! ```text
//! out/
//!   summary.json
//!   events.jsonl
//!   records.jsonl
//!   vqa_clean.jsonl
//!   vqa_artifact.jsonl
//!   images/<image_id>/clean.png
//!   images/<image_id>/<job>.png
//!   mappings/<image_id>/<job>.json
//! ```

mod config;
mod demo;
mod overlay;
mod plan;
mod run;
mod stages;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{ClientConfig, ClientKind, CorpusManifest, PipelineConfig};
pub use demo::{write_demo_corpus, DEMO_PATCH_PX};
pub use overlay::{draw_mapping_overlay, render_overlays, REFERENCE_COLOR, TARGET_COLOR};
pub use plan::{plan_candidates, plan_jobs, synthesize, Candidate, Job};
pub use run::{run_pipeline, run_pipeline_with, RunEvent, RunSummary};
pub use stages::{
    build_record, curate, inject, perceive, CurationReport, PerceivedScene, RecordPaths,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Stage(String),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub(crate) fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| PipelineError::io(path, e))
}
