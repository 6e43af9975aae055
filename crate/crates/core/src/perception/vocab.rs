use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::PerceptionError;

/// Granularity class of a subentity. Peripheral parts (fingers, legs) get
/// add/remove; intermediate parts (face, body) get distort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Peripheral,
    Intermediate,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Peripheral => "peripheral",
            Level::Intermediate => "intermediate",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubentitySpec {
    pub subentity: String,
    pub level: Level,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabularyEntry {
    pub entity: String,
    pub subentities: Vec<SubentitySpec>,
}

/// Entity -> subentity vocabulary for one image.
///
/// On disk this is a JSON object mapping each entity name to its list of
/// `{"subentity": ..., "level": "peripheral" | "intermediate"}` items:
///
/// ```json
/// {"dog": [{"subentity": "leg", "level": "peripheral"},
///          {"subentity": "body", "level": "intermediate"}]}
/// ```
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<VocabularyEntry>,
}

impl Vocabulary {
    pub fn new(entries: Vec<VocabularyEntry>) -> Result<Self, PerceptionError> {
        for e in &entries {
            if e.entity.trim().is_empty() {
                return Err(PerceptionError::Vocabulary("empty entity name".into()));
            }
            if let Some(s) = e.subentities.iter().find(|s| s.subentity.trim().is_empty()) {
                return Err(PerceptionError::Vocabulary(format!(
                    "empty subentity name under `{}` ({:?})",
                    e.entity, s.level
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn parse(text: &str) -> Result<Self, PerceptionError> {
        let raw: BTreeMap<String, Vec<SubentitySpec>> =
            serde_json::from_str(text).map_err(|e| PerceptionError::Vocabulary(e.to_string()))?;
        Self::new(
            raw.into_iter()
                .map(|(entity, subentities)| VocabularyEntry {
                    entity,
                    subentities,
                })
                .collect(),
        )
    }

    pub fn to_json(&self) -> String {
        let raw: BTreeMap<&str, &Vec<SubentitySpec>> = self
            .entries
            .iter()
            .map(|e| (e.entity.as_str(), &e.subentities))
            .collect();
        serde_json::to_string_pretty(&raw).expect("vocabulary serializes")
    }

    pub fn entries(&self) -> &[VocabularyEntry] {
        &self.entries
    }

    /// Level of `subentity` as listed under `entity`.
    pub fn level_of(&self, entity: &str, subentity: &str) -> Option<Level> {
        self.entries
            .iter()
            .filter(|e| e.entity == entity)
            .flat_map(|e| &e.subentities)
            .find(|s| s.subentity == subentity)
            .map(|s| s.level)
    }

    /// Level of `subentity` under any entity, first match in name order.
    pub fn level_any(&self, subentity: &str) -> Option<Level> {
        self.entries
            .iter()
            .flat_map(|e| &e.subentities)
            .find(|s| s.subentity == subentity)
            .map(|s| s.level)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_looks_up() {
        let v = Vocabulary::parse(
            r#"{"dog": [{"subentity": "leg", "level": "peripheral"},
                        {"subentity": "body", "level": "intermediate"}],
                "person": [{"subentity": "hand", "level": "peripheral"}]}"#,
        )
        .unwrap();
        assert_eq!(v.level_of("dog", "leg"), Some(Level::Peripheral));
        assert_eq!(v.level_of("dog", "body"), Some(Level::Intermediate));
        assert_eq!(v.level_of("dog", "hand"), None);
        assert_eq!(v.level_any("hand"), Some(Level::Peripheral));
        assert_eq!(Vocabulary::parse(&v.to_json()).unwrap(), v);
    }

    #[test]
    fn rejects_bad_levels_and_names() {
        assert!(Vocabulary::parse(r#"{"dog": [{"subentity": "leg", "level": "tiny"}]}"#).is_err());
        assert!(Vocabulary::parse(r#"{"": []}"#).is_err());
        assert!(
            Vocabulary::parse(r#"{"dog": [{"subentity": " ", "level": "peripheral"}]}"#).is_err()
        );
        assert!(Vocabulary::parse(
            r#"{"dog": [{"subentity": "leg", "level": "peripheral", "x": 1}]}"#
        )
        .is_err());
        assert!(Vocabulary::parse("[]").is_err());
    }
}
