//! On-disk form of a mapping, shared by the oracle, the verifier and
//! external injection pipelines.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{ArtifactType, GridError, PatchGrid, PatchMapping, PixelRect, Tool};
use crate::injection::ScheduleSnapshot;

use super::ToolParamsSnapshot;

pub const EXPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("malformed mapping export: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema_version {0}")]
    Version(u32),
    #[error("inconsistent mapping export: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingExport {
    pub schema_version: u32,
    pub grid: PatchGrid,
    pub tool: Tool,
    pub artifact_type: ArtifactType,
    /// `[target, reference]` as row-major linear indices, in mapping order.
    pub pairs: Vec<[usize; 2]>,
    /// Half-open pixel box around all targets; `null` for an empty mapping.
    pub target_bbox: Option<PixelRect>,
    pub seed: u64,
    pub schedule: ScheduleSnapshot,
    pub params: ToolParamsSnapshot,
}

impl MappingExport {
    pub fn new(
        mapping: &PatchMapping,
        seed: u64,
        schedule: ScheduleSnapshot,
        params: ToolParamsSnapshot,
    ) -> Result<Self, ExportError> {
        let grid = mapping.grid();
        let pairs = mapping
            .pairs()
            .iter()
            .map(|&(t, r)| Ok([grid.to_linear(t)?, grid.to_linear(r)?]))
            .collect::<Result<Vec<_>, GridError>>()?;
        let out = Self {
            schema_version: EXPORT_SCHEMA_VERSION,
            grid,
            tool: mapping.tool(),
            artifact_type: mapping.tool().artifact_type(),
            pairs,
            target_bbox: mapping.target_bbox(),
            seed,
            schedule,
            params,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn to_mapping(&self) -> Result<PatchMapping, ExportError> {
        let pairs = self
            .pairs
            .iter()
            .map(|&[t, r]| Ok((self.grid.from_linear(t)?, self.grid.from_linear(r)?)))
            .collect::<Result<Vec<_>, GridError>>()?;
        Ok(PatchMapping::new(self.grid, self.tool, pairs)?)
    }

    pub fn validate(&self) -> Result<(), ExportError> {
        if self.schema_version != EXPORT_SCHEMA_VERSION {
            return Err(ExportError::Version(self.schema_version));
        }
        if self.artifact_type.tool() != self.tool {
            return Err(ExportError::Inconsistent(format!(
                "tool {} vs artifact_type {}",
                self.tool, self.artifact_type
            )));
        }
        if self.params.tool() != self.tool {
            return Err(ExportError::Inconsistent(format!(
                "params are for {}",
                self.params.tool()
            )));
        }
        let mapping = self.to_mapping()?;
        if mapping.target_bbox() != self.target_bbox {
            return Err(ExportError::Inconsistent(
                "target_bbox does not match the pairs".into(),
            ));
        }
        let s = self.schedule;
        if s.pe_disabled_final_steps >= s.total_steps
            || s.value_steps > s.total_steps
            || s.value_blocks[0] > s.value_blocks[1]
        {
            return Err(ExportError::Inconsistent("schedule out of range".into()));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ExportError> {
        let out: Self = serde_json::from_str(text)?;
        out.validate()?;
        Ok(out)
    }

    /// Pretty JSON with a trailing newline; stable across runs.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("export serializes");
        s.push('\n');
        s
    }
}
