//! Entity/subentity grounding.
//!
//! Masks come in from files (PNG or COCO RLE), get projected onto the patch
//! grid, and each subentity is attached to the entity that contains the
//! largest fraction of it.

mod manifest;
mod mask;
mod rle;
mod vocab;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::grid::{PatchGrid, PatchSet, PixelRect};

pub use manifest::{InstanceEntry, InstanceKind, LoadedInstance, SceneManifest};
pub use mask::{binarize_to_patches, BinaryMask};
pub use rle::{CocoRle, Rle, RleError};
pub use vocab::{Level, SubentitySpec, Vocabulary, VocabularyEntry};

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("mask is {}x{}, expected {}x{}", found.0, found.1, expected.0, expected.1)]
    DimensionMismatch {
        expected: (u32, u32),
        found: (u32, u32),
    },
    #[error("overlap ratio is undefined for an empty subentity")]
    EmptySubentity,
    #[error("invalid vocabulary: {0}")]
    Vocabulary(String),
    #[error("invalid scene manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Rle(#[from] RleError),
    #[error("{}: {message}", path.display())]
    Image { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl PerceptionError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundingThresholds {
    /// Minimum in-patch foreground fraction for a patch to belong to a mask.
    #[serde(default = "default_half")]
    pub patch_fg: f64,
    /// Minimum `|sub ∩ ent| / |sub|` for a subentity to be attached.
    #[serde(default = "default_half")]
    pub containment: f64,
}

fn default_half() -> f64 {
    0.5
}

impl Default for GroundingThresholds {
    fn default() -> Self {
        Self {
            patch_fg: 0.5,
            containment: 0.5,
        }
    }
}

/// `|sub ∩ ent| / |sub|`.
pub fn overlap_ratio(sub: &PatchSet, ent: &PatchSet) -> Result<f64, PerceptionError> {
    if sub.is_empty() {
        return Err(PerceptionError::EmptySubentity);
    }
    Ok(sub.intersection_len(ent) as f64 / sub.len() as f64)
}

/// A labelled mask reduced to the patch grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskInstance {
    pub label: String,
    pub kind: InstanceKind,
    pub patches: PatchSet,
    /// Tight pixel bbox of the source mask.
    pub bbox: Option<PixelRect>,
}

impl MaskInstance {
    pub fn from_mask(
        label: impl Into<String>,
        kind: InstanceKind,
        mask: &BinaryMask,
        grid: &PatchGrid,
        patch_fg: f64,
    ) -> Result<Self, PerceptionError> {
        Ok(Self {
            label: label.into(),
            kind,
            patches: binarize_to_patches(mask, grid, patch_fg)?,
            bbox: mask.bbox(),
        })
    }

    /// Instance described directly by patches; the bbox covers those patches.
    pub fn from_patches(
        label: impl Into<String>,
        kind: InstanceKind,
        patches: PatchSet,
        grid: &PatchGrid,
    ) -> Self {
        let bbox = grid.bounding_rect(&patches);
        Self {
            label: label.into(),
            kind,
            patches,
            bbox,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundedSubentity {
    pub instance: MaskInstance,
    /// Index into [`GroundedScene::entities`].
    pub parent: usize,
    pub level: Level,
    pub overlap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedSubentity {
    pub label: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundedScene {
    pub grid: PatchGrid,
    pub entities: Vec<MaskInstance>,
    pub subentities: Vec<GroundedSubentity>,
    #[serde(default)]
    pub dropped: Vec<DroppedSubentity>,
}

impl GroundedScene {
    pub fn parent_of(&self, sub: usize) -> &MaskInstance {
        &self.entities[self.subentities[sub].parent]
    }

    /// Patches of every *other* grounded subentity carrying the same label.
    pub fn same_label_others(&self, sub: usize) -> PatchSet {
        let label = &self.subentities[sub].instance.label;
        self.subentities
            .iter()
            .enumerate()
            .filter(|(i, s)| *i != sub && &s.instance.label == label)
            .fold(PatchSet::new(), |acc, (_, s)| {
                acc.union(&s.instance.patches)
            })
    }

    /// Entity index pairs whose patch sets intersect, in index order.
    pub fn overlapping_entity_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for a in 0..self.entities.len() {
            for b in a + 1..self.entities.len() {
                if !self.entities[a]
                    .patches
                    .is_disjoint(&self.entities[b].patches)
                {
                    pairs.push((a, b));
                }
            }
        }
        pairs
    }
}

/// Attaches each subentity to the entity with the highest overlap ratio
/// (lowest index on ties) when that ratio reaches `containment`. Others are
/// dropped and reported in [`GroundedScene::dropped`].
pub fn ground_scene(
    grid: PatchGrid,
    entities: Vec<MaskInstance>,
    subentities: Vec<MaskInstance>,
    vocab: &Vocabulary,
    thresholds: &GroundingThresholds,
) -> GroundedScene {
    let mut grounded = Vec::new();
    let mut dropped = Vec::new();
    for sub in subentities {
        let mut drop = |reason: String| {
            warn!(subentity = %sub.label, %reason, "subentity dropped");
            dropped.push(DroppedSubentity {
                label: sub.label.clone(),
                reason,
            });
        };
        if sub.patches.is_empty() {
            drop("no patches after binarization".into());
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, ent) in entities.iter().enumerate() {
            let r = overlap_ratio(&sub.patches, &ent.patches).expect("non-empty checked above");
            if best.is_none_or(|(_, b)| r > b) {
                best = Some((i, r));
            }
        }
        let Some((parent, ratio)) = best else {
            drop("no entities in scene".into());
            continue;
        };
        if ratio < thresholds.containment {
            drop(format!(
                "max overlap {ratio:.3} below containment threshold {}",
                thresholds.containment
            ));
            continue;
        }
        let level = vocab
            .level_of(&entities[parent].label, &sub.label)
            .or_else(|| vocab.level_any(&sub.label));
        let Some(level) = level else {
            drop(format!("`{}` not in vocabulary", sub.label));
            continue;
        };
        grounded.push(GroundedSubentity {
            instance: sub,
            parent,
            level,
            overlap: ratio,
        });
    }
    GroundedScene {
        grid,
        entities,
        subentities: grounded,
        dropped,
    }
}

/// Loads a scene manifest from disk and grounds it on `patch_px` patches.
pub fn perceive_manifest(
    manifest_path: &Path,
    patch_px: u32,
    thresholds: &GroundingThresholds,
) -> Result<(SceneManifest, GroundedScene), crate::Error> {
    let manifest = SceneManifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let image_path = SceneManifest::resolve(base, &manifest.image);
    let (width, height) =
        image::image_dimensions(&image_path).map_err(|e| PerceptionError::Image {
            path: image_path.clone(),
            message: e.to_string(),
        })?;
    let grid = PatchGrid::for_image(width, height, patch_px)?;
    let vocab = manifest.load_vocabulary(base)?;
    let mut entities = Vec::new();
    let mut subentities = Vec::new();
    for inst in manifest.load_instances(base, width, height)? {
        let mi = MaskInstance::from_mask(
            inst.label,
            inst.kind,
            &inst.mask,
            &grid,
            thresholds.patch_fg,
        )?;
        match inst.kind {
            InstanceKind::Entity => entities.push(mi),
            InstanceKind::Subentity => subentities.push(mi),
        }
    }
    let scene = ground_scene(grid, entities, subentities, &vocab, thresholds);
    Ok((manifest, scene))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::parse(
            r#"{"dog": [{"subentity": "leg", "level": "peripheral"}],
                "cat": [{"subentity": "leg", "level": "peripheral"}]}"#,
        )
        .unwrap()
    }

    fn inst(label: &str, kind: InstanceKind, cells: &[(i32, i32)]) -> MaskInstance {
        let grid = PatchGrid::new(8, 8, 1).unwrap();
        MaskInstance::from_patches(
            label,
            kind,
            cells.iter().map(|&c| c.into()).collect(),
            &grid,
        )
    }

    #[test]
    fn overlap_ratio_examples() {
        let ent = PatchSet::from([(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert_eq!(
            overlap_ratio(&PatchSet::from([(0, 0), (1, 1)]), &ent).unwrap(),
            1.0
        );
        assert_eq!(overlap_ratio(&PatchSet::from([(5, 5)]), &ent).unwrap(), 0.0);
        let sub = PatchSet::from([(0, 0), (0, 1), (1, 1), (2, 2)]);
        assert_eq!(overlap_ratio(&sub, &ent).unwrap(), 0.75);
        assert!(matches!(
            overlap_ratio(&PatchSet::new(), &ent),
            Err(PerceptionError::EmptySubentity)
        ));
    }

    #[test]
    fn fully_contained_subentity_is_grounded() {
        let grid = PatchGrid::new(8, 8, 1).unwrap();
        let dog = inst(
            "dog",
            InstanceKind::Entity,
            &[(0, 0), (0, 1), (1, 0), (1, 1)],
        );
        let leg = inst("leg", InstanceKind::Subentity, &[(1, 0)]);
        let scene = ground_scene(
            grid,
            vec![dog],
            vec![leg],
            &vocab(),
            &GroundingThresholds::default(),
        );
        assert_eq!(scene.subentities.len(), 1);
        assert_eq!(scene.subentities[0].parent, 0);
        assert_eq!(scene.subentities[0].overlap, 1.0);
        assert_eq!(scene.subentities[0].level, Level::Peripheral);
    }

    #[test]
    fn argmax_parent_and_ties_to_lowest_index() {
        let grid = PatchGrid::new(8, 8, 1).unwrap();
        // leg: 10 patches in row 3; 9 inside dog, 2 inside cat (one shared).
        let leg_cells: Vec<(i32, i32)> = (0..10).map(|c| (3, c)).collect();
        let dog_cells: Vec<(i32, i32)> = (0..9).map(|c| (3, c)).collect();
        let cat_cells = [(3, 8), (3, 9)];
        let scene = ground_scene(
            grid,
            vec![
                inst("dog", InstanceKind::Entity, &dog_cells),
                inst("cat", InstanceKind::Entity, &cat_cells),
            ],
            vec![inst("leg", InstanceKind::Subentity, &leg_cells)],
            &vocab(),
            &GroundingThresholds::default(),
        );
        assert_eq!(scene.subentities[0].parent, 0);
        assert!((scene.subentities[0].overlap - 0.9).abs() < 1e-12);

        let scene = ground_scene(
            grid,
            vec![
                inst("cat", InstanceKind::Entity, &[(0, 0)]),
                inst("dog", InstanceKind::Entity, &[(0, 1)]),
            ],
            vec![inst("leg", InstanceKind::Subentity, &[(0, 0), (0, 1)])],
            &vocab(),
            &GroundingThresholds::default(),
        );
        assert_eq!(scene.subentities[0].parent, 0);
    }

    #[test]
    fn low_overlap_is_dropped() {
        // Three masks: entity of 3 patches, subentity of 10 with 3 inside,
        // and a far entity with 0 inside. Max ratio 0.3 < 0.5.
        let grid = PatchGrid::new(8, 8, 1).unwrap();
        let sub_cells: Vec<(i32, i32)> = (0..10).map(|i| (i / 8, i % 8)).collect();
        let scene = ground_scene(
            grid,
            vec![
                inst("dog", InstanceKind::Entity, &[(0, 0), (0, 1), (0, 2)]),
                inst("cat", InstanceKind::Entity, &[(7, 7)]),
            ],
            vec![inst("leg", InstanceKind::Subentity, &sub_cells)],
            &vocab(),
            &GroundingThresholds::default(),
        );
        assert!(scene.subentities.is_empty());
        assert_eq!(scene.dropped.len(), 1);
    }

    #[test]
    fn unknown_label_and_empty_subentity_dropped() {
        let grid = PatchGrid::new(8, 8, 1).unwrap();
        let scene = ground_scene(
            grid,
            vec![inst("dog", InstanceKind::Entity, &[(0, 0)])],
            vec![
                inst("tail", InstanceKind::Subentity, &[(0, 0)]),
                inst("leg", InstanceKind::Subentity, &[]),
            ],
            &vocab(),
            &GroundingThresholds::default(),
        );
        assert!(scene.subentities.is_empty());
        assert_eq!(scene.dropped.len(), 2);
    }

    #[test]
    fn same_label_others_and_overlapping_pairs() {
        let grid = PatchGrid::new(8, 8, 1).unwrap();
        let scene = ground_scene(
            grid,
            vec![
                inst("dog", InstanceKind::Entity, &[(0, 0), (0, 1)]),
                inst("cat", InstanceKind::Entity, &[(0, 1), (0, 2)]),
                inst("cat", InstanceKind::Entity, &[(5, 5)]),
            ],
            vec![
                inst("leg", InstanceKind::Subentity, &[(0, 0)]),
                inst("leg", InstanceKind::Subentity, &[(0, 2)]),
            ],
            &vocab(),
            &GroundingThresholds::default(),
        );
        assert_eq!(scene.same_label_others(0), PatchSet::from([(0, 2)]));
        assert_eq!(scene.overlapping_entity_pairs(), vec![(0, 1)]);
    }
}
