use serde::{Deserialize, Serialize};

use crate::grid::ArtifactType;

use super::InjectionError;

/// Final denoising steps with positional injection switched off, per type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeDisabledSteps {
    pub duplication: u32,
    pub omission: u32,
    pub distortion: u32,
    pub fusion: u32,
}

impl Default for PeDisabledSteps {
    fn default() -> Self {
        Self {
            duplication: 5,
            omission: 1,
            distortion: 5,
            fusion: 5,
        }
    }
}

impl PeDisabledSteps {
    pub fn get(&self, t: ArtifactType) -> u32 {
        match t {
            ArtifactType::Duplication => self.duplication,
            ArtifactType::Omission => self.omission,
            ArtifactType::Distortion => self.distortion,
            ArtifactType::Fusion => self.fusion,
        }
    }
}

/// Step/block gating for PE and value injection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InjectionSchedule {
    pub total_steps: u32,
    pub pe_disabled_final_steps: PeDisabledSteps,
    /// Value injection runs for steps `0..value_steps`.
    pub value_steps: u32,
    /// Inclusive block range with value injection.
    pub value_blocks: [u32; 2],
}

impl Default for InjectionSchedule {
    fn default() -> Self {
        Self {
            total_steps: 25,
            pe_disabled_final_steps: PeDisabledSteps::default(),
            value_steps: 15,
            value_blocks: [20, 38],
        }
    }
}

impl InjectionSchedule {
    pub fn validate(&self) -> Result<(), InjectionError> {
        let p = self.pe_disabled_final_steps;
        if [p.duplication, p.omission, p.distortion, p.fusion]
            .iter()
            .any(|&k| k >= self.total_steps)
        {
            return Err(InjectionError::Schedule(
                "pe_disabled_final_steps must be < total_steps".into(),
            ));
        }
        if self.value_steps > self.total_steps {
            return Err(InjectionError::Schedule(
                "value_steps must be <= total_steps".into(),
            ));
        }
        if self.value_blocks[0] > self.value_blocks[1] {
            return Err(InjectionError::Schedule(
                "value_blocks must be an ordered [first, last] pair".into(),
            ));
        }
        Ok(())
    }

    /// The slice of this schedule relevant to one artifact type.
    pub fn snapshot(&self, t: ArtifactType) -> ScheduleSnapshot {
        ScheduleSnapshot {
            total_steps: self.total_steps,
            pe_disabled_final_steps: self.pe_disabled_final_steps.get(t),
            value_steps: self.value_steps,
            value_blocks: self.value_blocks,
        }
    }
}

/// Per-artifact schedule written next to each mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSnapshot {
    pub total_steps: u32,
    pub pe_disabled_final_steps: u32,
    pub value_steps: u32,
    pub value_blocks: [u32; 2],
}

/// `(pe_on, value_on)` at a given denoising step and block.
pub fn schedule_gates(
    schedule: &InjectionSchedule,
    artifact: ArtifactType,
    step: u32,
    block: u32,
) -> Result<(bool, bool), InjectionError> {
    if step >= schedule.total_steps {
        return Err(InjectionError::Schedule(format!(
            "step {step} out of range 0..{}",
            schedule.total_steps
        )));
    }
    let pe_on = step < schedule.total_steps - schedule.pe_disabled_final_steps.get(artifact);
    let [lo, hi] = schedule.value_blocks;
    let value_on = step < schedule.value_steps && (lo..=hi).contains(&block);
    Ok((pe_on, value_on))
}
