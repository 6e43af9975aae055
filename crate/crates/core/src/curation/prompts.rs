use crate::grid::{ArtifactType, PixelRect};

pub const PROMPT_VERSION: &str = "v1";

const ARTIFACT_TYPES: &str = include_str!("../../assets/prompts/artifact_types.txt");
const FILTER: &str = include_str!("../../assets/prompts/filter_v1.txt");
const LOCAL: &str = include_str!("../../assets/prompts/local_v1.txt");
const GLOBAL: &str = include_str!("../../assets/prompts/global_v1.txt");

/// The description line for one artifact type, with `{entity}` filled.
pub fn artifact_type_description(t: ArtifactType, entity: &str) -> String {
    let prefix = format!("{}: ", t.as_str());
    let line = ARTIFACT_TYPES
        .lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .expect("every artifact type has a description");
    line.replace("{entity}", entity)
}

fn fill(template: &str, t: ArtifactType, entity: &str) -> String {
    template
        .replace(
            "{artifact_type_description}",
            &artifact_type_description(t, entity),
        )
        .replace("{entity}", entity)
}

pub fn render_filter_prompt(t: ArtifactType, entity: &str) -> String {
    fill(FILTER, t, entity)
}

pub fn render_local_prompt(t: ArtifactType, entity: &str) -> String {
    fill(LOCAL, t, entity)
}

pub fn render_global_prompt(locals: &[(PixelRect, String)]) -> String {
    let list: Vec<String> = locals
        .iter()
        .map(|(b, text)| format!("- {b}: {text}"))
        .collect();
    GLOBAL.replace("{bbox_list}", &list.join("\n"))
}
