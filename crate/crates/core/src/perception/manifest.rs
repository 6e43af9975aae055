//! Per-image scene manifest.
//!
//! ```json
//! {
//!   "image_id": "img_001",
//!   "image": "img_001.png",
//!   "caption": "a dog standing on grass",
//!   "vocabulary": "img_001.vocab.json",
//!   "instances": [
//!     {"label": "dog", "kind": "entity", "mask": "masks/dog.png"},
//!     {"label": "leg", "kind": "subentity", "rle": {"size": [64, 64], "counts": "..."}}
//!   ]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::mask::BinaryMask;
use super::rle::{CocoRle, Rle};
use super::vocab::Vocabulary;
use super::PerceptionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceKind {
    Entity,
    Subentity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceEntry {
    pub label: String,
    pub kind: InstanceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rle: Option<CocoRle>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub image_id: String,
    pub image: PathBuf,
    #[serde(default)]
    pub caption: String,
    pub vocabulary: PathBuf,
    pub instances: Vec<InstanceEntry>,
}

/// A decoded instance mask with its label.
#[derive(Debug, Clone)]
pub struct LoadedInstance {
    pub label: String,
    pub kind: InstanceKind,
    pub mask: BinaryMask,
}

impl SceneManifest {
    /// Parses and validates the document without touching the filesystem.
    pub fn parse(text: &str) -> Result<Self, PerceptionError> {
        let m: SceneManifest =
            serde_json::from_str(text).map_err(|e| PerceptionError::Manifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, PerceptionError> {
        let text = std::fs::read_to_string(path).map_err(|e| PerceptionError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        if self.image_id.is_empty()
            || !self
                .image_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
            || self.image_id.starts_with('.')
        {
            return Err(PerceptionError::Manifest(format!(
                "image_id `{}` must be non-empty [A-Za-z0-9_.-] and not start with '.'",
                self.image_id
            )));
        }
        for (i, inst) in self.instances.iter().enumerate() {
            if inst.label.trim().is_empty() {
                return Err(PerceptionError::Manifest(format!(
                    "instance {i} has an empty label"
                )));
            }
            match (&inst.mask, &inst.rle) {
                (Some(_), None) | (None, Some(_)) => {}
                _ => {
                    return Err(PerceptionError::Manifest(format!(
                        "instance {i} (`{}`) needs exactly one of `mask` or `rle`",
                        inst.label
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn resolve(base: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }

    pub fn load_vocabulary(&self, base: &Path) -> Result<Vocabulary, PerceptionError> {
        let path = Self::resolve(base, &self.vocabulary);
        let text = std::fs::read_to_string(&path).map_err(|e| PerceptionError::io(&path, e))?;
        Vocabulary::parse(&text)
    }

    /// Decodes every instance mask; all must be `width x height`.
    pub fn load_instances(
        &self,
        base: &Path,
        width: u32,
        height: u32,
    ) -> Result<Vec<LoadedInstance>, PerceptionError> {
        self.instances
            .iter()
            .map(|inst| {
                let mask = match (&inst.mask, &inst.rle) {
                    (Some(p), _) => BinaryMask::load_png(&Self::resolve(base, p))?,
                    (_, Some(rle)) => Rle::from_coco(rle)?.decode(),
                    _ => unreachable!("validated"),
                };
                if mask.width() != width || mask.height() != height {
                    return Err(PerceptionError::DimensionMismatch {
                        expected: (width, height),
                        found: (mask.width(), mask.height()),
                    });
                }
                Ok(LoadedInstance {
                    label: inst.label.clone(),
                    kind: inst.kind,
                    mask,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_instance_forms() {
        let m = SceneManifest::parse(
            r#"{"image_id": "a_1", "image": "a.png", "vocabulary": "v.json",
                "instances": [
                  {"label": "dog", "kind": "entity", "mask": "dog.png"},
                  {"label": "leg", "kind": "subentity", "rle": {"size": [2, 2], "counts": "121"}}
                ]}"#,
        )
        .unwrap();
        assert_eq!(m.instances.len(), 2);
        assert_eq!(m.caption, "");
    }

    #[test]
    fn rejects_ambiguous_instances_and_bad_ids() {
        let both = r#"{"image_id": "a", "image": "a.png", "vocabulary": "v.json",
            "instances": [{"label": "dog", "kind": "entity", "mask": "d.png",
                           "rle": {"size": [1, 1], "counts": "1"}}]}"#;
        assert!(SceneManifest::parse(both).is_err());
        let neither = r#"{"image_id": "a", "image": "a.png", "vocabulary": "v.json",
            "instances": [{"label": "dog", "kind": "entity"}]}"#;
        assert!(SceneManifest::parse(neither).is_err());
        let bad_id =
            r#"{"image_id": "../x", "image": "a.png", "vocabulary": "v.json", "instances": []}"#;
        assert!(SceneManifest::parse(bad_id).is_err());
    }

    #[test]
    fn rle_instance_must_match_image_size() {
        let m = SceneManifest::parse(
            r#"{"image_id": "a", "image": "a.png", "vocabulary": "v.json",
                "instances": [{"label": "leg", "kind": "subentity", "rle": {"size": [2, 2], "counts": "121"}}]}"#,
        )
        .unwrap();
        let base = Path::new(".");
        assert!(m.load_instances(base, 2, 2).is_ok());
        assert!(matches!(
            m.load_instances(base, 4, 4),
            Err(PerceptionError::DimensionMismatch { .. })
        ));
    }
}
