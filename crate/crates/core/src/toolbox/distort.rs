use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::grid::{PatchCoord, PatchGrid, PatchMapping, PatchSet, Tool};

use super::{require_in_grid, DistortKernel, DistortParams, SceneContext, ToolError};

/// A seeded random permutation of `targets`.
pub fn shuffle_kernel<R: Rng + ?Sized>(targets: &[PatchCoord], rng: &mut R) -> Vec<PatchCoord> {
    let mut refs = targets.to_vec();
    refs.shuffle(rng);
    refs
}

/// Gaussian-offset references inside the entity.
///
/// Each sample is rounded and then projected onto the grid. A sample is
/// accepted when it lands in `ent` (or unconditionally when `ent` is empty).
/// After `max_attempts` rejections the L1-nearest `ent` patch is used.
pub fn jitter_kernel<R: Rng + ?Sized>(
    targets: &[PatchCoord],
    sigma: f64,
    grid: &PatchGrid,
    ent: &PatchSet,
    max_attempts: u32,
    rng: &mut R,
) -> Result<Vec<PatchCoord>, ToolError> {
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| ToolError::InvalidParams(format!("jitter sigma: {e}")))?;
    let mut refs = Vec::with_capacity(targets.len());
    for &p in targets {
        let mut found = None;
        for _ in 0..max_attempts {
            let (dy, dx) = if sigma == 0.0 {
                (0.0, 0.0)
            } else {
                (normal.sample(rng), normal.sample(rng))
            };
            let n = grid.project(
                (p.row as f64 + dy).round() as i64,
                (p.col as f64 + dx).round() as i64,
            );
            if ent.is_empty() || ent.contains(&n) {
                found = Some(n);
                break;
            }
        }
        refs.push(found.unwrap_or_else(|| ent.nearest(p).unwrap_or(p)));
    }
    Ok(refs)
}

/// Circular shift of strip `s` (1-based): `+1, -2, +3, -4, ...`.
pub fn strip_shift(s: usize) -> i64 {
    let m = s as i64;
    if s % 2 == 1 {
        m
    } else {
        -m
    }
}

/// Band shearing. Returns one reference per entry of `targets` in its
/// iteration order.
///
/// Tall shapes (bbox height >= width) are cut into horizontal bands stacked
/// along the rows; wide shapes into vertical bands along the columns.
/// Patches are ordered by (major, minor) coordinate and split into
/// `strips` runs of near-equal length; run `s` is rotated by
/// [`strip_shift`]`(s)`.
pub fn strip_kernel(targets: &PatchSet, strips: u32) -> Result<Vec<PatchCoord>, ToolError> {
    if targets.is_empty() {
        return Err(ToolError::EmptyInput);
    }
    if strips < 1 {
        return Err(ToolError::InvalidParams("strip count must be >= 1".into()));
    }
    let (mut r0, mut r1, mut c0, mut c1) = (i32::MAX, i32::MIN, i32::MAX, i32::MIN);
    for p in targets {
        r0 = r0.min(p.row);
        r1 = r1.max(p.row);
        c0 = c0.min(p.col);
        c1 = c1.max(p.col);
    }
    let vertical = (r1 - r0 + 1) >= (c1 - c0 + 1);
    let mut ordered = targets.to_vec();
    if !vertical {
        ordered.sort_by_key(|p| (p.col, p.row));
    }
    let n = ordered.len();
    let s_count = strips as usize;
    let mut assigned: BTreeMap<PatchCoord, PatchCoord> = BTreeMap::new();
    for s in 0..s_count {
        let strip = &ordered[s * n / s_count..(s + 1) * n / s_count];
        let len = strip.len() as i64;
        if len == 0 {
            continue;
        }
        let shift = strip_shift(s + 1);
        for (u, &p) in strip.iter().enumerate() {
            let v = (u as i64 + shift).rem_euclid(len) as usize;
            assigned.insert(p, strip[v]);
        }
    }
    Ok(targets.iter().map(|p| assigned[p]).collect())
}

/// Pairs each target with the reference picked by the configured kernel.
pub fn distort_tool<R: Rng + ?Sized>(
    targets: &PatchSet,
    ctx: &SceneContext,
    params: &DistortParams,
    grid: &PatchGrid,
    rng: &mut R,
) -> Result<PatchMapping, ToolError> {
    params.validate()?;
    if targets.is_empty() {
        return Err(ToolError::EmptyInput);
    }
    require_in_grid(targets, grid)?;
    let order = targets.to_vec();
    let refs = match params.kernel {
        DistortKernel::Shuffle => shuffle_kernel(&order, rng),
        DistortKernel::Jitter => jitter_kernel(
            &order,
            params.sigma,
            grid,
            &ctx.ent,
            params.max_attempts,
            rng,
        )?,
        DistortKernel::Strip => strip_kernel(targets, params.strips)?,
    };
    Ok(PatchMapping::new(
        *grid,
        Tool::Distort,
        order.into_iter().zip(refs).collect(),
    )?)
}
