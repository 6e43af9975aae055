use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::grid::{PatchMapping, Tool};
use crate::perception::{GroundedScene, Level};
use crate::rng::{derived_seed, substream, StreamRng};
use crate::toolbox::{
    add_tool, distort_tool, fuse_tool, remove_tool, SceneContext, ToolError, ToolParams,
    ToolParamsSnapshot,
};

/// One place a tool could be applied in a scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Candidate {
    /// A grounded subentity, by index into `GroundedScene::subentities`.
    Subentity { tool: Tool, index: usize },
    /// Two overlapping entities, by index into `GroundedScene::entities`.
    EntityPair { a: usize, b: usize },
}

impl Candidate {
    pub fn tool(&self) -> Tool {
        match self {
            Candidate::Subentity { tool, .. } => *tool,
            Candidate::EntityPair { .. } => Tool::Fuse,
        }
    }
}

/// A planned tool invocation with everything needed to replay it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Job {
    pub job_id: String,
    pub image_id: String,
    pub candidate: Candidate,
    /// Entity label, or `a+b` for a fused pair.
    pub entity: String,
    pub subentity: Option<String>,
    /// Seed of the tool's random stream.
    pub seed: u64,
}

impl Job {
    /// Job for a given candidate; the tool seed is derived from the image
    /// id and tool name.
    pub fn for_candidate(
        image_id: &str,
        scene: &GroundedScene,
        candidate: Candidate,
        global_seed: u64,
    ) -> Job {
        let tool = candidate.tool();
        let (entity, subentity) = match candidate {
            Candidate::Subentity { index, .. } => (
                scene.parent_of(index).label.clone(),
                Some(scene.subentities[index].instance.label.clone()),
            ),
            Candidate::EntityPair { a, b } => (
                format!("{}+{}", scene.entities[a].label, scene.entities[b].label),
                None,
            ),
        };
        Job {
            job_id: tool.as_str().to_string(),
            image_id: image_id.to_string(),
            candidate,
            entity,
            subentity,
            seed: derived_seed(global_seed, &[image_id, "synthesize", tool.as_str()]),
        }
    }

    pub fn tool(&self) -> Tool {
        self.candidate.tool()
    }

    pub fn record_id(&self) -> String {
        format!("{}-{}", self.image_id, self.job_id)
    }

    /// Entity phrase used in judge prompts.
    pub fn prompt_entity(&self) -> String {
        self.entity.replace('+', " and ")
    }
}

/// Every candidate for the enabled tools: subentities in scene order
/// (peripheral parts get add then remove, intermediate parts distort),
/// followed by overlapping entity pairs.
pub fn plan_candidates(scene: &GroundedScene, tools: &[Tool]) -> Vec<Candidate> {
    let mut out = Vec::new();
    for (index, sub) in scene.subentities.iter().enumerate() {
        let applicable: &[Tool] = match sub.level {
            Level::Peripheral => &[Tool::Add, Tool::Remove],
            Level::Intermediate => &[Tool::Distort],
        };
        out.extend(
            applicable
                .iter()
                .filter(|t| tools.contains(t))
                .map(|&tool| Candidate::Subentity { tool, index }),
        );
    }
    if tools.contains(&Tool::Fuse) {
        out.extend(
            scene
                .overlapping_entity_pairs()
                .into_iter()
                .map(|(a, b)| Candidate::EntityPair { a, b }),
        );
    }
    out
}

/// Picks candidates with the image's planning stream: one overall, or one
/// per tool when `expand_all_tools` is set.
pub fn plan_jobs(
    image_id: &str,
    scene: &GroundedScene,
    tools: &[Tool],
    expand_all_tools: bool,
    global_seed: u64,
) -> Vec<Job> {
    let cands = plan_candidates(scene, tools);
    let mut rng = substream(global_seed, &[image_id, "plan"]);
    let chosen: Vec<Candidate> = if expand_all_tools {
        Tool::ALL
            .iter()
            .filter_map(|&t| {
                let of_tool: Vec<&Candidate> = cands.iter().filter(|c| c.tool() == t).collect();
                (!of_tool.is_empty()).then(|| *of_tool[rng.random_range(0..of_tool.len())])
            })
            .collect()
    } else if cands.is_empty() {
        Vec::new()
    } else {
        vec![cands[rng.random_range(0..cands.len())]]
    };
    chosen
        .into_iter()
        .map(|c| Job::for_candidate(image_id, scene, c, global_seed))
        .collect()
}

/// Runs the job's tool on the scene.
pub fn synthesize(
    scene: &GroundedScene,
    job: &Job,
    params: &ToolParams,
) -> Result<(PatchMapping, ToolParamsSnapshot), ToolError> {
    let grid = scene.grid;
    let mut rng = StreamRng::seed_from_u64(job.seed);
    let check_sub = |index: usize| {
        if index >= scene.subentities.len() {
            return Err(ToolError::InvalidParams(format!(
                "subentity {index} not in scene"
            )));
        }
        Ok(SceneContext {
            ent: scene.parent_of(index).patches.clone(),
            sub: scene.same_label_others(index),
        })
    };
    match job.candidate {
        Candidate::Subentity { tool, index } => {
            let ctx = check_sub(index)?;
            let parts = &scene.subentities[index].instance.patches;
            Ok(match tool {
                Tool::Add => (
                    add_tool(parts, &ctx, &params.add, &grid)?,
                    ToolParamsSnapshot::Add(params.add),
                ),
                Tool::Remove => (
                    remove_tool(parts, &ctx, &params.remove, &grid)?,
                    ToolParamsSnapshot::Remove(params.remove),
                ),
                Tool::Distort => (
                    distort_tool(parts, &ctx, &params.distort, &grid, &mut rng)?,
                    ToolParamsSnapshot::Distort(params.distort),
                ),
                Tool::Fuse => {
                    return Err(ToolError::InvalidParams(
                        "fuse applies to entity pairs".into(),
                    ))
                }
            })
        }
        Candidate::EntityPair { a, b } => {
            let n = scene.entities.len();
            if a >= n || b >= n || a == b {
                return Err(ToolError::InvalidParams(format!(
                    "entity pair ({a}, {b}) not in scene"
                )));
            }
            let m = fuse_tool(
                &scene.entities[a].patches,
                &scene.entities[b].patches,
                &params.fuse,
                &grid,
                &mut rng,
            )?;
            Ok((m, ToolParamsSnapshot::Fuse(params.fuse)))
        }
    }
}
