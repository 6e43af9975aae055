use std::path::Path;

use crate::grid::{PatchCoord, PatchGrid, PatchSet, PixelRect};

use super::PerceptionError;

/// One bit per pixel, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                m.bits[(y * width + x) as usize] = f(x, y);
            }
        }
        m
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y as usize) * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.bits[(y as usize) * self.width as usize + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Tight half-open bounding box of the foreground.
    pub fn bbox(&self) -> Option<PixelRect> {
        let mut rect: Option<PixelRect> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    let px = PixelRect {
                        x0: x,
                        y0: y,
                        x1: x + 1,
                        y1: y + 1,
                    };
                    rect = Some(rect.map_or(px, |r| r.union(&px)));
                }
            }
        }
        rect
    }

    /// Loads an 8-bit single-channel image; any nonzero sample is foreground.
    pub fn load_png(path: &Path) -> Result<Self, PerceptionError> {
        let err = |message: String| PerceptionError::Image {
            path: path.to_path_buf(),
            message,
        };
        let bytes = std::fs::read(path).map_err(|e| err(e.to_string()))?;
        Self::decode_png(&bytes).map_err(err)
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self, PerceptionError> {
        Self::decode_png(bytes).map_err(|message| PerceptionError::Image {
            path: "<memory>".into(),
            message,
        })
    }

    fn decode_png(bytes: &[u8]) -> Result<Self, String> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
            .map_err(|e| e.to_string())?
            .into_luma8();
        let (w, h) = img.dimensions();
        Ok(Self {
            width: w,
            height: h,
            bits: img.into_raw().into_iter().map(|v| v != 0).collect(),
        })
    }

    pub fn save_png(&self, path: &Path) -> Result<(), PerceptionError> {
        let raw: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        let img =
            image::GrayImage::from_raw(self.width, self.height, raw).expect("buffer sized to dims");
        img.save(path).map_err(|e| PerceptionError::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Patches whose foreground fraction is at least `threshold`.
    pub fn to_patches(
        &self,
        grid: &PatchGrid,
        threshold: f64,
    ) -> Result<PatchSet, PerceptionError> {
        binarize_to_patches(self, grid, threshold)
    }
}

/// Projects a pixel mask onto the patch grid. A patch is kept iff the fraction
/// of its pixels set in `mask` is `>= patch_fg_threshold`.
pub fn binarize_to_patches(
    mask: &BinaryMask,
    grid: &PatchGrid,
    patch_fg_threshold: f64,
) -> Result<PatchSet, PerceptionError> {
    if mask.width != grid.width_px() || mask.height != grid.height_px() {
        return Err(PerceptionError::DimensionMismatch {
            expected: (grid.width_px(), grid.height_px()),
            found: (mask.width, mask.height),
        });
    }
    let p = grid.patch_px();
    let area = (p as u64 * p as u64) as f64;
    let mut set = PatchSet::new();
    for c in grid.coords() {
        let (x0, y0) = (c.col as u32 * p, c.row as u32 * p);
        let mut on = 0u64;
        for y in y0..y0 + p {
            for x in x0..x0 + p {
                on += mask.get(x, y) as u64;
            }
        }
        if on as f64 >= patch_fg_threshold * area {
            set.insert(PatchCoord::new(c.row, c.col));
        }
    }
    Ok(set)
}
