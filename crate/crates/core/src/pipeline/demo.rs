//! Small synthetic corpus with hand-placed masks, for smoke runs and tests.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde_json::json;

use crate::grid::{PatchCoord, PatchGrid};
use crate::injection::PixelImage;
use crate::perception::{BinaryMask, Rle};
use crate::rng::substream;

use super::{write_file, CorpusManifest, PipelineError};

pub const DEMO_PATCH_PX: u32 = 16;
const GRID: u32 = 8;

struct Part {
    label: &'static str,
    entity: bool,
    rows: (i32, i32),
    cols: (i32, i32),
    color: [i32; 3],
    /// Per-patch brightness steps, so patch permutations are visible.
    structured: bool,
}

const PARTS: [Part; 7] = [
    Part {
        label: "dog",
        entity: true,
        rows: (1, 6),
        cols: (1, 4),
        color: [190, 120, 40],
        structured: false,
    },
    Part {
        label: "cat",
        entity: true,
        rows: (3, 7),
        cols: (3, 7),
        color: [40, 70, 215],
        structured: false,
    },
    Part {
        label: "head",
        entity: false,
        rows: (1, 3),
        cols: (2, 4),
        color: [190, 130, 80],
        structured: true,
    },
    Part {
        label: "ear",
        entity: false,
        rows: (1, 2),
        cols: (1, 2),
        color: [205, 150, 110],
        structured: false,
    },
    Part {
        label: "leg",
        entity: false,
        rows: (5, 6),
        cols: (1, 2),
        color: [110, 70, 35],
        structured: false,
    },
    Part {
        label: "tail",
        entity: false,
        rows: (6, 7),
        cols: (6, 7),
        color: [40, 50, 130],
        structured: false,
    },
    Part {
        label: "whisker",
        entity: false,
        rows: (4, 5),
        cols: (5, 6),
        color: [150, 160, 225],
        structured: false,
    },
];

const VOCAB: &str = r#"{
  "dog": [
    {"subentity": "ear", "level": "peripheral"},
    {"subentity": "leg", "level": "peripheral"},
    {"subentity": "head", "level": "intermediate"}
  ],
  "cat": [
    {"subentity": "tail", "level": "peripheral"},
    {"subentity": "whisker", "level": "peripheral"}
  ]
}
"#;

fn io_err(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Stage(format!("demo corpus: {e}"))
}

/// Writes `n_images` scenes of a dog overlapping a cat under `dir` and
/// returns the corpus manifest path. Placement shifts by at most one patch
/// and textures vary with `seed`.
pub fn write_demo_corpus(dir: &Path, n_images: usize, seed: u64) -> Result<PathBuf, crate::Error> {
    let grid = PatchGrid::new(GRID, GRID, DEMO_PATCH_PX)?;
    let side = grid.width_px();
    let mut scenes = Vec::new();
    for i in 0..n_images {
        let id = format!("img_{i:03}");
        let mut rng = substream(seed, &["demo", &id]);
        let shift = (rng.random_range(0..2i32), rng.random_range(0..2i32));
        let phase: [u32; 3] = std::array::from_fn(|_| rng.random_range(0..64));
        let tint = rng.random_range(-20..=20i32);
        let local = |x: u32, y: u32| {
            PatchCoord::new(
                (y / DEMO_PATCH_PX) as i32 - shift.0,
                (x / DEMO_PATCH_PX) as i32 - shift.1,
            )
        };
        let inside = |p: &Part, x: u32, y: u32| {
            let c = local(x, y);
            (p.rows.0..p.rows.1).contains(&c.row) && (p.cols.0..p.cols.1).contains(&c.col)
        };
        let image = PixelImage::from_fn(side, side, |x, y| {
            let part = PARTS.iter().rev().find(|p| inside(p, x, y));
            let base = part.map_or([70, 115, 60], |p| p.color);
            let step = match part {
                Some(p) if p.structured => {
                    let c = local(x, y);
                    ((c.row - p.rows.0) * 2 + (c.col - p.cols.0)) * 30 - 45
                }
                _ => 0,
            };
            std::array::from_fn(|c| {
                let tex = ((x * (5 + c as u32) + y * (11 - c as u32) + phase[c]) % 40) as i32 - 20;
                (base[c] + tex + tint + step).clamp(0, 255) as u8
            })
        });
        let scene_dir = dir.join(&id);
        write_file(&scene_dir.join("image.png"), image.to_png_bytes())?;
        write_file(&scene_dir.join("vocab.json"), VOCAB)?;
        let mut instances = Vec::new();
        for (k, p) in PARTS.iter().enumerate() {
            let mask = BinaryMask::from_fn(side, side, |x, y| inside(p, x, y));
            let kind = if p.entity { "entity" } else { "subentity" };
            if k % 2 == 0 {
                let rel = format!("masks/{}.png", p.label);
                std::fs::create_dir_all(scene_dir.join("masks")).map_err(io_err)?;
                mask.save_png(&scene_dir.join(&rel))?;
                instances.push(json!({"label": p.label, "kind": kind, "mask": rel}));
            } else {
                instances.push(
                    json!({"label": p.label, "kind": kind, "rle": Rle::encode(&mask).to_coco()}),
                );
            }
        }
        let manifest = json!({
            "image_id": id,
            "image": "image.png",
            "caption": "A brown dog and a blue cat sit side by side on the grass.",
            "vocabulary": "vocab.json",
            "instances": instances,
        });
        write_file(
            &scene_dir.join("scene.json"),
            serde_json::to_string_pretty(&manifest).map_err(io_err)? + "\n",
        )?;
        scenes.push(PathBuf::from(&id).join("scene.json"));
    }
    let corpus = dir.join("corpus.json");
    let text = serde_json::to_string_pretty(&CorpusManifest { scenes }).map_err(io_err)? + "\n";
    write_file(&corpus, text)?;
    Ok(corpus)
}
