use serde::{Deserialize, Serialize};

use crate::grid::PixelRect;

use super::EvalError;

/// Largest canvas a region may declare.
pub const MAX_REGION_PIXELS: u64 = 1 << 28;

/// One bit per pixel, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryPixelMap {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryPixelMap {
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
        self.bits[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.bits[(y * self.width + x) as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn union_with(&mut self, other: &BinaryPixelMap) -> Result<(), EvalError> {
        self.same_dims(other)?;
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
        Ok(())
    }

    pub(crate) fn same_dims(&self, other: &BinaryPixelMap) -> Result<(), EvalError> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(EvalError::Dimensions(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

/// Region geometry, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Region {
    /// Half-open `[x_min, y_min, x_max, y_max]`.
    Bbox { bbox: PixelRect },
    /// Vertices in pixel coordinates; filled with the even-odd rule.
    Polygon { points: Vec<[f64; 2]> },
    /// Row-major scores in [0, 1], one per pixel.
    Heatmap { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionAnnotation {
    pub width: u32,
    pub height: u32,
    #[serde(flatten)]
    pub region: Region,
}

impl RegionAnnotation {
    pub fn bbox(width: u32, height: u32, bbox: PixelRect) -> Self {
        Self {
            width,
            height,
            region: Region::Bbox { bbox },
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.width as u64 * self.height as u64 > MAX_REGION_PIXELS {
            return Err(EvalError::Geometry(format!(
                "canvas {}x{} is too large",
                self.width, self.height
            )));
        }
        match &self.region {
            Region::Bbox { bbox } => {
                if bbox.x0 > bbox.x1 || bbox.y0 > bbox.y1 || !bbox.within(self.width, self.height) {
                    return Err(EvalError::Geometry(format!(
                        "bbox {bbox} outside {}x{}",
                        self.width, self.height
                    )));
                }
            }
            Region::Polygon { points } => {
                if points.len() < 3 {
                    return Err(EvalError::Geometry(
                        "polygon needs at least 3 vertices".into(),
                    ));
                }
                let (w, h) = (self.width as f64, self.height as f64);
                if points.iter().any(|[x, y]| {
                    !(x.is_finite()
                        && y.is_finite()
                        && (0.0..=w).contains(x)
                        && (0.0..=h).contains(y))
                }) {
                    return Err(EvalError::Geometry(
                        "polygon vertex outside the image".into(),
                    ));
                }
            }
            Region::Heatmap { values } => {
                if values.len() != self.width as usize * self.height as usize {
                    return Err(EvalError::Geometry(format!(
                        "heatmap has {} values for {}x{}",
                        values.len(),
                        self.width,
                        self.height
                    )));
                }
                if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(EvalError::Geometry(
                        "heatmap values must lie in [0, 1]".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(px: f64, py: f64, points: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = points.len();
    let mut j = n - 1;
    for i in 0..n {
        let [xi, yi] = points[i];
        let [xj, yj] = points[j];
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Pixel map of a region. Polygons are sampled at pixel centres.
pub fn rasterize(
    region: &RegionAnnotation,
    heat_threshold: f64,
) -> Result<BinaryPixelMap, EvalError> {
    region.validate()?;
    let (w, h) = (region.width, region.height);
    Ok(match &region.region {
        Region::Bbox { bbox } => BinaryPixelMap::from_fn(w, h, |x, y| bbox.contains_px(x, y)),
        Region::Polygon { points } => BinaryPixelMap::from_fn(w, h, |x, y| {
            point_in_polygon(x as f64 + 0.5, y as f64 + 0.5, points)
        }),
        Region::Heatmap { values } => {
            BinaryPixelMap::from_fn(w, h, |x, y| values[(y * w + x) as usize] >= heat_threshold)
        }
    })
}

/// Union of several regions on a `width x height` canvas.
pub fn rasterize_all(
    regions: &[RegionAnnotation],
    width: u32,
    height: u32,
    heat_threshold: f64,
) -> Result<BinaryPixelMap, EvalError> {
    let mut out = BinaryPixelMap::new(width, height);
    for r in regions {
        out.union_with(&rasterize(r, heat_threshold)?)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oversized_canvas_is_rejected() {
        let r = RegionAnnotation::bbox(
            u32::MAX,
            u32::MAX,
            PixelRect {
                x0: 0,
                y0: 0,
                x1: 1,
                y1: 1,
            },
        );
        assert!(matches!(r.validate(), Err(EvalError::Geometry(_))));
    }

    #[test]
    fn bbox_area() {
        let m = rasterize(
            &RegionAnnotation::bbox(
                4,
                4,
                PixelRect {
                    x0: 0,
                    y0: 0,
                    x1: 2,
                    y1: 2,
                },
            ),
            0.5,
        )
        .unwrap();
        assert_eq!(m.count(), 4);
        for (x0, y0, x1, y1) in [(1, 2, 5, 7), (0, 0, 8, 8), (3, 3, 3, 6)] {
            let r = PixelRect { x0, y0, x1, y1 };
            let m = rasterize(&RegionAnnotation::bbox(8, 8, r), 0.5).unwrap();
            assert_eq!(m.count() as u64, ((x1 - x0) * (y1 - y0)) as u64);
        }
    }

    #[test]
    fn heatmap_threshold() {
        let a = RegionAnnotation {
            width: 3,
            height: 2,
            region: Region::Heatmap {
                values: vec![0.6; 6],
            },
        };
        assert_eq!(rasterize(&a, 0.5).unwrap().count(), 6);
        assert_eq!(rasterize(&a, 0.6).unwrap().count(), 6);
        assert_eq!(rasterize(&a, 0.61).unwrap().count(), 0);
        let bad = RegionAnnotation {
            width: 1,
            height: 1,
            region: Region::Heatmap { values: vec![1.5] },
        };
        assert!(rasterize(&bad, 0.5).is_err());
    }

    #[test]
    fn right_triangle_matches_half_plane() {
        // Triangle (0,0), (8,0), (0,8): centre (x+.5, y+.5) inside iff x+y+1 < 8.
        let a = RegionAnnotation {
            width: 8,
            height: 8,
            region: Region::Polygon {
                points: vec![[0.0, 0.0], [8.0, 0.0], [0.0, 8.0]],
            },
        };
        let m = rasterize(&a, 0.5).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(m.get(x, y), x + y + 1 < 8, "({x},{y})");
            }
        }
        assert_eq!(m.count(), 28);
    }

    #[test]
    fn self_overlapping_polygon_uses_even_odd() {
        // Pentagram-like star: centre region is covered twice and left empty.
        let pts = vec![
            [5.0, 0.0],
            [8.0, 10.0],
            [0.0, 3.5],
            [10.0, 3.5],
            [2.0, 10.0],
        ];
        let a = RegionAnnotation {
            width: 10,
            height: 10,
            region: Region::Polygon {
                points: pts.clone(),
            },
        };
        let m = rasterize(&a, 0.5).unwrap();
        assert!(!m.get(5, 5));
        // Brute force: count edge crossings of a ray to the right.
        for y in 0..10 {
            for x in 0..10 {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let mut crossings = 0;
                for i in 0..pts.len() {
                    let [ax, ay] = pts[i];
                    let [bx, by] = pts[(i + 1) % pts.len()];
                    if (ay > py) != (by > py) {
                        let t = (py - ay) / (by - ay);
                        if ax + t * (bx - ax) > px {
                            crossings += 1;
                        }
                    }
                }
                assert_eq!(m.get(x, y), crossings % 2 == 1);
            }
        }
    }

    #[test]
    fn malformed_geometry() {
        assert!(rasterize(
            &RegionAnnotation::bbox(
                4,
                4,
                PixelRect {
                    x0: 0,
                    y0: 0,
                    x1: 5,
                    y1: 2
                }
            ),
            0.5
        )
        .is_err());
        let two = RegionAnnotation {
            width: 4,
            height: 4,
            region: Region::Polygon {
                points: vec![[0.0, 0.0], [1.0, 1.0]],
            },
        };
        assert!(rasterize(&two, 0.5).is_err());
    }

    #[test]
    fn serde_shape() {
        let a = RegionAnnotation::bbox(
            4,
            4,
            PixelRect {
                x0: 0,
                y0: 1,
                x1: 2,
                y1: 3,
            },
        );
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(
            s,
            r#"{"width":4,"height":4,"kind":"bbox","bbox":[0,1,2,3]}"#
        );
        assert_eq!(serde_json::from_str::<RegionAnnotation>(&s).unwrap(), a);
    }
}
