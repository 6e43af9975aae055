use std::path::Path;

use crate::dataset::ArtifactRecord;
use crate::grid::{PatchCoord, PatchMapping};
use crate::injection::{InjectionError, PixelImage};
use crate::toolbox::MappingExport;

use super::PipelineError;

pub const TARGET_COLOR: [u8; 3] = [255, 0, 0];
pub const REFERENCE_COLOR: [u8; 3] = [0, 96, 255];

fn outline(
    img: &mut PixelImage,
    mapping: &PatchMapping,
    c: PatchCoord,
    rgb: [u8; 3],
) -> Result<(), InjectionError> {
    let r = mapping.grid().patch_pixel_rect(c)?;
    for x in r.x0..r.x1 {
        img.set(x, r.y0, rgb);
        img.set(x, r.y1 - 1, rgb);
    }
    for y in r.y0..r.y1 {
        img.set(r.x0, y, rgb);
        img.set(r.x1 - 1, y, rgb);
    }
    Ok(())
}

/// Outlines reference patches, then target patches, one pixel wide.
pub fn draw_mapping_overlay(
    img: &PixelImage,
    mapping: &PatchMapping,
) -> Result<PixelImage, InjectionError> {
    let g = mapping.grid();
    if (img.width(), img.height()) != (g.width_px(), g.height_px()) {
        return Err(InjectionError::Dimensions {
            want_w: g.width_px(),
            want_h: g.height_px(),
            found_w: img.width(),
            found_h: img.height(),
        });
    }
    let mut out = img.clone();
    for r in mapping.references().iter() {
        outline(&mut out, mapping, *r, REFERENCE_COLOR)?;
    }
    for t in mapping.targets().iter() {
        outline(&mut out, mapping, *t, TARGET_COLOR)?;
    }
    Ok(out)
}

/// Overlay of a record's mapping on its clean image. Record paths resolve
/// against `root`.
pub fn render_overlays(record: &ArtifactRecord, root: &Path) -> Result<PixelImage, crate::Error> {
    let export_path = root.join(&record.mapping_export);
    let text =
        std::fs::read_to_string(&export_path).map_err(|e| PipelineError::io(&export_path, e))?;
    let mapping = MappingExport::parse(&text)?.to_mapping()?;
    let img = PixelImage::load_png(&root.join(&record.source_image))?;
    Ok(draw_mapping_overlay(&img, &mapping)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{PatchGrid, Tool};

    fn img(g: &PatchGrid) -> PixelImage {
        PixelImage::from_fn(g.width_px(), g.height_px(), |x, y| {
            [(x * 9) as u8, (y * 5) as u8, 7]
        })
    }

    fn on_boundary(g: &PatchGrid, c: PatchCoord, x: u32, y: u32) -> bool {
        let r = g.patch_pixel_rect(c).unwrap();
        r.contains_px(x, y) && (x == r.x0 || x == r.x1 - 1 || y == r.y0 || y == r.y1 - 1)
    }

    #[test]
    fn empty_mapping_is_identity() {
        let g = PatchGrid::new(3, 3, 4).unwrap();
        let base = img(&g);
        assert_eq!(
            draw_mapping_overlay(&base, &PatchMapping::empty(g, Tool::Add)).unwrap(),
            base
        );
    }

    #[test]
    fn one_pair_draws_two_rects() {
        let g = PatchGrid::new(3, 4, 4).unwrap();
        let base = img(&g);
        let (t, r) = (PatchCoord::new(0, 0), PatchCoord::new(2, 3));
        let m = PatchMapping::new(g, Tool::Add, vec![(t, r)]).unwrap();
        let out = draw_mapping_overlay(&base, &m).unwrap();
        assert_eq!((out.width(), out.height()), (base.width(), base.height()));
        let mut changed = 0;
        for y in 0..base.height() {
            for x in 0..base.width() {
                let expect = if on_boundary(&g, t, x, y) {
                    TARGET_COLOR
                } else if on_boundary(&g, r, x, y) {
                    REFERENCE_COLOR
                } else {
                    base.get(x, y)
                };
                assert_eq!(out.get(x, y), expect, "({x},{y})");
                changed += (expect != base.get(x, y)) as usize;
            }
        }
        // Two 4x4 outlines of 12 pixels each.
        assert_eq!(changed, 24);
    }

    #[test]
    fn wrong_size_is_rejected() {
        let g = PatchGrid::new(2, 2, 4).unwrap();
        let m = PatchMapping::empty(g, Tool::Add);
        assert!(draw_mapping_overlay(&PixelImage::new(4, 4), &m).is_err());
    }
}
