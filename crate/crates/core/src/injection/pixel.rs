use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, RgbImage};

use crate::grid::{PatchGrid, PatchMapping, PixelRect};

use super::InjectionError;

/// 8-bit RGB image, row-major, 3 bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl PixelImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; width as usize * height as usize * 3],
        }
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        Self::from_fn(width, height, |_, _| rgb)
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, InjectionError> {
        if data.len() != width as usize * height as usize * 3 {
            return Err(InjectionError::Shape(format!(
                "{} bytes for a {width}x{height} RGB image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    fn idx(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.idx(x, y);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = self.idx(x, y);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn fill_rect(&mut self, rect: PixelRect, rgb: [u8; 3]) {
        for y in rect.y0..rect.y1.min(self.height) {
            for x in rect.x0..rect.x1.min(self.width) {
                self.set(x, y, rgb);
            }
        }
    }

    pub fn crop(&self, rect: PixelRect) -> Result<PixelImage, InjectionError> {
        if !rect.within(self.width, self.height) {
            return Err(InjectionError::Shape(format!(
                "crop {rect} outside {}x{}",
                self.width, self.height
            )));
        }
        Ok(Self::from_fn(rect.width(), rect.height(), |x, y| {
            self.get(rect.x0 + x, rect.y0 + y)
        }))
    }

    pub fn load_png(path: &Path) -> Result<Self, InjectionError> {
        let err = |message: String| InjectionError::Image {
            path: path.into(),
            message,
        };
        let bytes = std::fs::read(path).map_err(|e| err(e.to_string()))?;
        Self::decode_png(&bytes).map_err(err)
    }

    /// Decodes an in-memory PNG; any colour type is converted to RGB.
    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self, InjectionError> {
        Self::decode_png(bytes).map_err(|message| InjectionError::Image {
            path: "<memory>".into(),
            message,
        })
    }

    fn decode_png(bytes: &[u8]) -> Result<Self, String> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
            .map_err(|e| e.to_string())?;
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        Ok(Self {
            width: w,
            height: h,
            data: rgb.into_raw(),
        })
    }

    pub fn to_png_bytes(&self) -> Vec<u8> {
        let img = RgbImage::from_raw(self.width, self.height, self.data.clone())
            .expect("buffer length checked");
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png)
            .expect("in-memory PNG encoding");
        out.into_inner()
    }

    pub fn save_png(&self, path: &Path) -> Result<(), InjectionError> {
        std::fs::write(path, self.to_png_bytes()).map_err(|e| InjectionError::Image {
            path: path.into(),
            message: e.to_string(),
        })
    }
}

/// Copies each reference patch block onto its target block.
///
/// Reference pixels are always read from the input, so chained pairs do not
/// cascade. With `blend > 0` the outer `blend` pixels of each target block
/// are mixed linearly with the original target pixels.
pub fn render_pixel_oracle(
    img: &PixelImage,
    mapping: &PatchMapping,
    grid: &PatchGrid,
    blend: u32,
) -> Result<PixelImage, InjectionError> {
    if img.width != grid.width_px() || img.height != grid.height_px() {
        return Err(InjectionError::Dimensions {
            want_w: grid.width_px(),
            want_h: grid.height_px(),
            found_w: img.width,
            found_h: img.height,
        });
    }
    if mapping.grid() != *grid {
        return Err(InjectionError::Shape(
            "mapping grid differs from image grid".into(),
        ));
    }
    let p = grid.patch_px();
    let mut out = img.clone();
    for &(t, r) in mapping.pairs() {
        let tr = grid.patch_pixel_rect(t)?;
        let rr = grid.patch_pixel_rect(r)?;
        for ly in 0..p {
            for lx in 0..p {
                let src = img.get(rr.x0 + lx, rr.y0 + ly);
                let edge = lx.min(ly).min(p - 1 - lx).min(p - 1 - ly);
                let px = if blend == 0 || edge >= blend {
                    src
                } else {
                    let w = (edge + 1) as f64 / (blend + 1) as f64;
                    let orig = img.get(tr.x0 + lx, tr.y0 + ly);
                    std::array::from_fn(|c| {
                        (w * src[c] as f64 + (1.0 - w) * orig[c] as f64).round() as u8
                    })
                };
                out.set(tr.x0 + lx, tr.y0 + ly, px);
            }
        }
    }
    Ok(out)
}
