//! Synthesis of structural-artifact training pairs from segmented images.
//!
//! Segmentation masks are grounded onto a patch grid ([`perception`]), a
//! geometric tool turns the scene into a target/reference patch mapping
//! ([`toolbox`]), and the mapping is applied to pixels or checked against a
//! toy attention layer ([`injection`]). Results are gated and explained
//! ([`curation`]), written out as records and VQA turns ([`dataset`]), and
//! scored ([`evaluation`]). [`pipeline`] strings the stages together.

pub mod curation;
pub mod dataset;
pub mod evaluation;
pub mod grid;
pub mod injection;
pub mod perception;
pub mod pipeline;
pub mod rng;
pub mod toolbox;

use thiserror::Error;

pub use grid::{
    ArtifactType, GridError, PatchCoord, PatchGrid, PatchMapping, PatchSet, PixelRect, Tool,
};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Perception(#[from] perception::PerceptionError),
    #[error(transparent)]
    Tool(#[from] toolbox::ToolError),
    #[error(transparent)]
    Export(#[from] toolbox::ExportError),
    #[error(transparent)]
    Injection(#[from] injection::InjectionError),
    #[error(transparent)]
    Curation(#[from] curation::CurationError),
    #[error(transparent)]
    Dataset(#[from] dataset::DatasetError),
    #[error(transparent)]
    Eval(#[from] evaluation::EvalError),
    #[error(transparent)]
    Pipeline(#[from] pipeline::PipelineError),
}
