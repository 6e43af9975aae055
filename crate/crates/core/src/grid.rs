//! Patch-grid coordinate system.
//!
//! An image of `cols * patch_px` by `rows * patch_px` pixels is split into a
//! regular grid of square patches. Every mapping, mask and tool in this crate
//! speaks in [`PatchCoord`]s on a [`PatchGrid`]. Coordinates are 0-based and
//! linearized row-major.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("grid dimensions must be positive (rows={rows}, cols={cols}, patch_px={patch_px})")]
    InvalidDimensions { rows: u32, cols: u32, patch_px: u32 },
    #[error("coordinate {coord} lies outside a {rows}x{cols} grid")]
    InvalidCoordinate {
        coord: PatchCoord,
        rows: u32,
        cols: u32,
    },
    #[error("linear index {index} out of range for {len} patches")]
    InvalidIndex { index: usize, len: usize },
    #[error("image size {width}x{height} is not tiled by {patch_px}px patches")]
    NotTiled {
        width: u32,
        height: u32,
        patch_px: u32,
    },
    #[error("target {0} appears more than once in mapping")]
    DuplicateTarget(PatchCoord),
}

/// Regular grid of `rows x cols` square patches, each `patch_px` pixels wide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct PatchGrid {
    rows: u32,
    cols: u32,
    patch_px: u32,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    rows: u32,
    cols: u32,
    patch_px: u32,
}

impl TryFrom<RawGrid> for PatchGrid {
    type Error = GridError;
    fn try_from(raw: RawGrid) -> Result<Self, Self::Error> {
        PatchGrid::new(raw.rows, raw.cols, raw.patch_px)
    }
}

impl From<PatchGrid> for RawGrid {
    fn from(g: PatchGrid) -> Self {
        RawGrid {
            rows: g.rows,
            cols: g.cols,
            patch_px: g.patch_px,
        }
    }
}

impl PatchGrid {
    pub fn new(rows: u32, cols: u32, patch_px: u32) -> Result<Self, GridError> {
        if rows == 0 || cols == 0 || patch_px == 0 {
            return Err(GridError::InvalidDimensions {
                rows,
                cols,
                patch_px,
            });
        }
        Ok(Self {
            rows,
            cols,
            patch_px,
        })
    }

    /// Grid for an image of the given pixel size. Sides must be exact
    /// multiples of `patch_px`.
    pub fn for_image(width: u32, height: u32, patch_px: u32) -> Result<Self, GridError> {
        if patch_px == 0
            || width == 0
            || height == 0
            || !width.is_multiple_of(patch_px)
            || !height.is_multiple_of(patch_px)
        {
            return Err(GridError::NotTiled {
                width,
                height,
                patch_px,
            });
        }
        Self::new(height / patch_px, width / patch_px, patch_px)
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }

    pub fn patch_px(&self) -> u32 {
        self.patch_px
    }

    /// Total patch count `rows * cols`.
    pub fn len(&self) -> usize {
        self.rows as usize * self.cols as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn width_px(&self) -> u32 {
        self.cols * self.patch_px
    }

    pub fn height_px(&self) -> u32 {
        self.rows * self.patch_px
    }

    pub fn contains(&self, c: PatchCoord) -> bool {
        c.row >= 0
            && c.col >= 0
            && (c.row as i64) < self.rows as i64
            && (c.col as i64) < self.cols as i64
    }

    pub fn check(&self, c: PatchCoord) -> Result<(), GridError> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(GridError::InvalidCoordinate {
                coord: c,
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    pub fn to_linear(&self, c: PatchCoord) -> Result<usize, GridError> {
        self.check(c)?;
        Ok(c.row as usize * self.cols as usize + c.col as usize)
    }

    pub fn from_linear(&self, index: usize) -> Result<PatchCoord, GridError> {
        if index >= self.len() {
            return Err(GridError::InvalidIndex {
                index,
                len: self.len(),
            });
        }
        let cols = self.cols as usize;
        Ok(PatchCoord::new(
            (index / cols) as i32,
            (index % cols) as i32,
        ))
    }

    /// Every coordinate on the grid, row-major.
    pub fn coords(&self) -> impl Iterator<Item = PatchCoord> + '_ {
        (0..self.rows as i32)
            .flat_map(move |r| (0..self.cols as i32).map(move |c| PatchCoord::new(r, c)))
    }

    /// Keeps the candidates that lie on the grid; the rest are discarded,
    /// not projected onto the border.
    pub fn clip_candidates<I>(&self, cands: I) -> PatchSet
    where
        I: IntoIterator<Item = PatchCoord>,
    {
        cands.into_iter().filter(|c| self.contains(*c)).collect()
    }

    /// Projects a coordinate onto the nearest boundary cell.
    pub fn project(&self, row: i64, col: i64) -> PatchCoord {
        PatchCoord::new(
            row.clamp(0, self.rows as i64 - 1) as i32,
            col.clamp(0, self.cols as i64 - 1) as i32,
        )
    }

    pub fn patch_pixel_rect(&self, c: PatchCoord) -> Result<PixelRect, GridError> {
        self.check(c)?;
        let p = self.patch_px;
        let (r, col) = (c.row as u32, c.col as u32);
        Ok(PixelRect {
            x0: col * p,
            y0: r * p,
            x1: (col + 1) * p,
            y1: (r + 1) * p,
        })
    }

    /// Smallest pixel rectangle covering all patches of `set`.
    pub fn bounding_rect(&self, set: &PatchSet) -> Option<PixelRect> {
        let mut it = set.iter().filter(|c| self.contains(**c));
        let first = it.next()?;
        let mut rect = self.patch_pixel_rect(*first).ok()?;
        for c in it {
            rect = rect.union(&self.patch_pixel_rect(*c).ok()?);
        }
        Some(rect)
    }
}

/// Patch coordinate. Signed so that candidate positions can temporarily fall
/// off the grid before clipping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PatchCoord {
    pub row: i32,
    pub col: i32,
}

impl PatchCoord {
    pub const fn new(row: i32, col: i32) -> Self {
        Self { row, col }
    }

    pub fn offset(self, d_row: i32, d_col: i32) -> Self {
        Self::new(self.row + d_row, self.col + d_col)
    }

    pub fn l1(self, other: PatchCoord) -> u32 {
        (self.row - other.row).unsigned_abs() + (self.col - other.col).unsigned_abs()
    }
}

impl fmt::Display for PatchCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

impl From<(i32, i32)> for PatchCoord {
    fn from((row, col): (i32, i32)) -> Self {
        Self::new(row, col)
    }
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
///
/// Serialized as `[x_min, y_min, x_max, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 4]", into = "[u32; 4]")]
pub struct PixelRect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl From<[u32; 4]> for PixelRect {
    fn from([x0, y0, x1, y1]: [u32; 4]) -> Self {
        Self { x0, y0, x1, y1 }
    }
}

impl From<PixelRect> for [u32; 4] {
    fn from(r: PixelRect) -> Self {
        [r.x0, r.y0, r.x1, r.y1]
    }
}

impl PixelRect {
    pub fn width(&self) -> u32 {
        self.x1.saturating_sub(self.x0)
    }

    pub fn height(&self) -> u32 {
        self.y1.saturating_sub(self.y0)
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.width() == 0 || self.height() == 0
    }

    pub fn contains_px(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn union(&self, other: &PixelRect) -> PixelRect {
        PixelRect {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    /// True when the rectangle is well-formed and fits inside `width x height`.
    pub fn within(&self, width: u32, height: u32) -> bool {
        self.x0 <= self.x1 && self.y0 <= self.y1 && self.x1 <= width && self.y1 <= height
    }
}

impl fmt::Display for PixelRect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.x0, self.y0, self.x1, self.y1)
    }
}

/// Ordered set of patch coordinates. Iteration is lexicographic in
/// `(row, col)`, which is what every tie-break in the toolbox relies on.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PatchSet(BTreeSet<PatchCoord>);

impl PatchSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, c: &PatchCoord) -> bool {
        self.0.contains(c)
    }

    pub fn insert(&mut self, c: PatchCoord) -> bool {
        self.0.insert(c)
    }

    pub fn remove(&mut self, c: &PatchCoord) -> bool {
        self.0.remove(c)
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &PatchCoord> + ExactSizeIterator + '_ {
        self.0.iter()
    }

    pub fn first(&self) -> Option<PatchCoord> {
        self.0.first().copied()
    }

    pub fn to_vec(&self) -> Vec<PatchCoord> {
        self.0.iter().copied().collect()
    }

    pub fn union(&self, other: &PatchSet) -> PatchSet {
        self.0.union(&other.0).copied().collect()
    }

    pub fn intersection(&self, other: &PatchSet) -> PatchSet {
        self.0.intersection(&other.0).copied().collect()
    }

    pub fn difference(&self, other: &PatchSet) -> PatchSet {
        self.0.difference(&other.0).copied().collect()
    }

    pub fn intersection_len(&self, other: &PatchSet) -> usize {
        self.0.intersection(&other.0).count()
    }

    pub fn is_subset(&self, other: &PatchSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn is_disjoint(&self, other: &PatchSet) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn all_within(&self, grid: &PatchGrid) -> bool {
        self.0.iter().all(|c| grid.contains(*c))
    }

    /// L1-nearest member to `p`, ties broken lexicographically.
    pub fn nearest(&self, p: PatchCoord) -> Option<PatchCoord> {
        // BTreeSet order + strict `<` keeps the lexicographically first on ties.
        let mut best: Option<(u32, PatchCoord)> = None;
        for &q in &self.0 {
            let d = p.l1(q);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, q));
            }
        }
        best.map(|(_, q)| q)
    }

    /// L1 distance from `p` to the closest member, `None` when empty.
    pub fn distance_to(&self, p: PatchCoord) -> Option<u32> {
        self.0.iter().map(|q| p.l1(*q)).min()
    }
}

impl FromIterator<PatchCoord> for PatchSet {
    fn from_iter<T: IntoIterator<Item = PatchCoord>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a PatchSet {
    type Item = &'a PatchCoord;
    type IntoIter = std::collections::btree_set::Iter<'a, PatchCoord>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl IntoIterator for PatchSet {
    type Item = PatchCoord;
    type IntoIter = std::collections::btree_set::IntoIter<PatchCoord>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

impl<const N: usize> From<[(i32, i32); N]> for PatchSet {
    fn from(arr: [(i32, i32); N]) -> Self {
        arr.into_iter().map(PatchCoord::from).collect()
    }
}

/// Which injection tool produced a mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tool {
    Add,
    Remove,
    Distort,
    Fuse,
}

impl Tool {
    pub const ALL: [Tool; 4] = [Tool::Add, Tool::Remove, Tool::Distort, Tool::Fuse];

    pub fn artifact_type(self) -> ArtifactType {
        match self {
            Tool::Add => ArtifactType::Duplication,
            Tool::Remove => ArtifactType::Omission,
            Tool::Distort => ArtifactType::Distortion,
            Tool::Fuse => ArtifactType::Fusion,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tool::Add => "add",
            Tool::Remove => "remove",
            Tool::Distort => "distort",
            Tool::Fuse => "fuse",
        }
    }
}

impl fmt::Display for Tool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Structural artifact category. Each tool produces exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactType {
    Duplication,
    Omission,
    Distortion,
    Fusion,
}

impl ArtifactType {
    pub const ALL: [ArtifactType; 4] = [
        ArtifactType::Duplication,
        ArtifactType::Omission,
        ArtifactType::Distortion,
        ArtifactType::Fusion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ArtifactType::Duplication => "duplication",
            ArtifactType::Omission => "omission",
            ArtifactType::Distortion => "distortion",
            ArtifactType::Fusion => "fusion",
        }
    }

    pub fn tool(self) -> Tool {
        match self {
            ArtifactType::Duplication => Tool::Add,
            ArtifactType::Omission => Tool::Remove,
            ArtifactType::Distortion => Tool::Distort,
            ArtifactType::Fusion => Tool::Fuse,
        }
    }
}

impl fmt::Display for ArtifactType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ArtifactType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ArtifactType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown artifact type `{s}`"))
    }
}

impl std::str::FromStr for Tool {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Tool::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown tool `{s}`"))
    }
}

/// Ordered target -> reference pairs produced by one tool call.
///
/// Targets are unique and every coordinate lies on `grid`; both are checked
/// at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchMapping {
    grid: PatchGrid,
    tool: Tool,
    pairs: Vec<(PatchCoord, PatchCoord)>,
}

impl PatchMapping {
    pub fn new(
        grid: PatchGrid,
        tool: Tool,
        pairs: Vec<(PatchCoord, PatchCoord)>,
    ) -> Result<Self, GridError> {
        let mut seen = BTreeSet::new();
        for &(t, r) in &pairs {
            grid.check(t)?;
            grid.check(r)?;
            if !seen.insert(t) {
                return Err(GridError::DuplicateTarget(t));
            }
        }
        Ok(Self { grid, tool, pairs })
    }

    pub fn empty(grid: PatchGrid, tool: Tool) -> Self {
        Self {
            grid,
            tool,
            pairs: Vec::new(),
        }
    }

    pub fn grid(&self) -> PatchGrid {
        self.grid
    }

    pub fn tool(&self) -> Tool {
        self.tool
    }

    pub fn pairs(&self) -> &[(PatchCoord, PatchCoord)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn targets(&self) -> PatchSet {
        self.pairs.iter().map(|(t, _)| *t).collect()
    }

    pub fn references(&self) -> PatchSet {
        self.pairs.iter().map(|(_, r)| *r).collect()
    }

    /// Background patches: the grid minus the targets.
    pub fn background(&self) -> PatchSet {
        let targets = self.targets();
        self.grid
            .coords()
            .filter(|c| !targets.contains(c))
            .collect()
    }

    /// Reference for each linear index, `None` for background patches.
    pub fn reference_table(&self) -> Vec<Option<usize>> {
        let mut table = vec![None; self.grid.len()];
        for &(t, r) in &self.pairs {
            // Coordinates were validated in `new`.
            let ti = self.grid.to_linear(t).expect("validated target");
            table[ti] = Some(self.grid.to_linear(r).expect("validated reference"));
        }
        table
    }

    /// Pixel bounding box of all targets.
    pub fn target_bbox(&self) -> Option<PixelRect> {
        self.grid.bounding_rect(&self.targets())
    }
}
