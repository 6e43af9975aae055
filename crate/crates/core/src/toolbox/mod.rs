//! Target/reference patch-mapping tools.
//!
//! * [`add_tool`] copies a subentity next to itself (duplication).
//! * [`remove_tool`] paints a subentity over with nearby context (omission).
//! * [`distort_tool`] scrambles patches inside a subentity (distortion).
//! * [`fuse_tool`] blends two overlapping entities along their interface
//!   (fusion).
//!
//! Every argmax/argmin breaks ties on the lexicographically smallest
//! `(row, col)` unless stated otherwise.

mod add;
mod distort;
mod export;
mod fuse;
mod remove;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridError, PatchGrid, PatchSet};

pub use add::{add_scores, add_tool, centroid, perimeter_band, AddCandidate};
pub use distort::{distort_tool, jitter_kernel, shuffle_kernel, strip_kernel, strip_shift};
pub use export::{ExportError, MappingExport, EXPORT_SCHEMA_VERSION};
pub use fuse::{
    best_offset, farthest_point_sampling, fuse_detailed, fuse_tool, offset_or_nearest,
    offset_window, opposite_region, overlap_fusion_band, FuseOutcome,
};
pub use remove::{local_neighborhood, remove_pool, remove_tool};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToolError {
    #[error("input patch set is empty")]
    EmptyInput,
    #[error("no candidate placement inside the grid")]
    NoCandidate,
    #[error("reference pool is empty")]
    NoReference,
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Entity context for subentity tools.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneContext {
    /// Foreground of the owning entity instance.
    pub ent: PatchSet,
    /// Patches of other instances of the same subentity label.
    pub sub: PatchSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AddParams {
    /// Ring thickness (max L1 distance of a candidate centre).
    pub alpha: u32,
    pub lambda_dist: f64,
}

impl Default for AddParams {
    fn default() -> Self {
        Self {
            alpha: 4,
            lambda_dist: 0.1,
        }
    }
}

impl AddParams {
    pub fn validate(&self) -> Result<(), ToolError> {
        if self.alpha < 1 {
            return Err(ToolError::InvalidParams("add.alpha must be >= 1".into()));
        }
        if !(self.lambda_dist >= 0.0 && self.lambda_dist.is_finite()) {
            return Err(ToolError::InvalidParams(
                "add.lambda_dist must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RemoveParams {
    /// L1 neighbourhood radius.
    pub radius: u32,
}

impl Default for RemoveParams {
    fn default() -> Self {
        Self { radius: 2 }
    }
}

impl RemoveParams {
    pub fn validate(&self) -> Result<(), ToolError> {
        if self.radius < 1 {
            return Err(ToolError::InvalidParams(
                "remove.radius must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistortKernel {
    Shuffle,
    Jitter,
    Strip,
}

impl DistortKernel {
    pub const ALL: [DistortKernel; 3] = [
        DistortKernel::Shuffle,
        DistortKernel::Jitter,
        DistortKernel::Strip,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistortParams {
    pub kernel: DistortKernel,
    /// Gaussian jitter std-dev in patches.
    pub sigma: f64,
    /// Strip count.
    pub strips: u32,
    /// Jitter resample budget per patch.
    pub max_attempts: u32,
}

impl Default for DistortParams {
    fn default() -> Self {
        Self {
            kernel: DistortKernel::Shuffle,
            sigma: 1.5,
            strips: 3,
            max_attempts: 16,
        }
    }
}

impl DistortParams {
    pub fn validate(&self) -> Result<(), ToolError> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(ToolError::InvalidParams(
                "distort.sigma must be finite and >= 0".into(),
            ));
        }
        if self.strips < 1 || self.max_attempts < 1 {
            return Err(ToolError::InvalidParams(
                "distort.strips and distort.max_attempts must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FuseParams {
    /// L1 radius of the band around the overlap.
    pub band_radius: u32,
    /// Largest L1 length of a region offset.
    pub max_offset: u32,
    /// Number of farthest-point seeds.
    pub seeds: u32,
    /// Fraction of forward pairs that also get a mirrored pair.
    pub reversed_fraction: f64,
}

impl Default for FuseParams {
    fn default() -> Self {
        Self {
            band_radius: 1,
            max_offset: 3,
            seeds: 4,
            reversed_fraction: 0.5,
        }
    }
}

impl FuseParams {
    pub fn validate(&self) -> Result<(), ToolError> {
        if self.band_radius < 1 || self.max_offset < 1 || self.seeds < 1 {
            return Err(ToolError::InvalidParams(
                "fuse.band_radius, max_offset, seeds must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.reversed_fraction) {
            return Err(ToolError::InvalidParams(
                "fuse.reversed_fraction must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Parameters for every tool; the subset a given tool uses is recorded with
/// each artifact.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToolParams {
    pub add: AddParams,
    pub remove: RemoveParams,
    pub distort: DistortParams,
    pub fuse: FuseParams,
}

impl ToolParams {
    pub fn validate(&self) -> Result<(), ToolError> {
        self.add.validate()?;
        self.remove.validate()?;
        self.distort.validate()?;
        self.fuse.validate()
    }
}

/// Parameters actually used by one tool invocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tool", rename_all = "lowercase")]
pub enum ToolParamsSnapshot {
    Add(AddParams),
    Remove(RemoveParams),
    Distort(DistortParams),
    Fuse(FuseParams),
}

impl ToolParamsSnapshot {
    pub fn tool(&self) -> crate::grid::Tool {
        use crate::grid::Tool;
        match self {
            ToolParamsSnapshot::Add(_) => Tool::Add,
            ToolParamsSnapshot::Remove(_) => Tool::Remove,
            ToolParamsSnapshot::Distort(_) => Tool::Distort,
            ToolParamsSnapshot::Fuse(_) => Tool::Fuse,
        }
    }
}

pub(crate) fn require_in_grid(set: &PatchSet, grid: &PatchGrid) -> Result<(), ToolError> {
    for c in set {
        grid.check(*c)?;
    }
    Ok(())
}

/// All offsets with `lo <= |dr| + |dc| <= hi`, ordered by `(|dr|+|dc|, dr, dc)`.
pub(crate) fn l1_offsets(lo: u32, hi: u32) -> Vec<(i32, i32)> {
    let h = hi as i32;
    let mut out = Vec::new();
    for dr in -h..=h {
        for dc in -h..=h {
            let n = (dr.unsigned_abs()) + (dc.unsigned_abs());
            if n >= lo && n <= hi {
                out.push((dr, dc));
            }
        }
    }
    out.sort_by_key(|&(dr, dc)| (dr.unsigned_abs() + dc.unsigned_abs(), dr, dc));
    out
}
