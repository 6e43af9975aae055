use std::collections::BTreeSet;

use rand::Rng;

use crate::grid::{PatchCoord, PatchGrid, PatchMapping, PatchSet, Tool};

use super::{l1_offsets, require_in_grid, FuseParams, ToolError};

/// Foreground patches within L1 distance `band_radius` of the overlap.
pub fn overlap_fusion_band(
    overlap: &PatchSet,
    fg: &PatchSet,
    band_radius: u32,
    grid: &PatchGrid,
) -> PatchSet {
    let ball = l1_offsets(0, band_radius);
    let mut band = PatchSet::new();
    for o in overlap {
        for &(dr, dc) in &ball {
            let v = o.offset(dr, dc);
            if grid.contains(v) && fg.contains(&v) {
                band.insert(v);
            }
        }
    }
    band
}

/// Greedy farthest-point seeds under L1.
///
/// The first seed is the point closest to the (unrounded) centroid; each
/// later seed maximises the distance to its nearest chosen seed. Ties go to
/// the lexicographically smallest point. `k` is capped at `pts.len()`.
pub fn farthest_point_sampling(pts: &PatchSet, k: usize) -> Vec<PatchCoord> {
    if pts.is_empty() || k == 0 {
        return Vec::new();
    }
    let k = k.min(pts.len());
    let points = pts.to_vec();
    let n = points.len() as i64;
    let (sr, sc) = points.iter().fold((0i64, 0i64), |(r, c), p| {
        (r + p.row as i64, c + p.col as i64)
    });
    // n * L1(p, centroid), exact in integers.
    let scaled = |p: &PatchCoord| (n * p.row as i64 - sr).abs() + (n * p.col as i64 - sc).abs();
    let first = *points
        .iter()
        .min_by_key(|p| (scaled(p), **p))
        .expect("non-empty");

    let mut seeds = vec![first];
    let mut dist: Vec<u32> = points.iter().map(|p| p.l1(first)).collect();
    while seeds.len() < k {
        let mut best = 0usize;
        for i in 1..points.len() {
            if dist[i] > dist[best] {
                best = i;
            }
        }
        let s = points[best];
        seeds.push(s);
        for (d, p) in dist.iter_mut().zip(&points) {
            *d = (*d).min(p.l1(s));
        }
    }
    seeds
}

/// Side to borrow from for a region whose seed is `seed`.
///
/// Closer to A-only -> B-only, closer to B-only -> A-only; a tie (including
/// both sides empty) falls back to `fg \ band`.
pub fn opposite_region(
    seed: PatchCoord,
    a_only: &PatchSet,
    b_only: &PatchSet,
    fg: &PatchSet,
    band: &PatchSet,
) -> PatchSet {
    let d_a = a_only.distance_to(seed).map_or(u64::MAX, u64::from);
    let d_b = b_only.distance_to(seed).map_or(u64::MAX, u64::from);
    if d_a < d_b {
        b_only.clone()
    } else if d_b < d_a {
        a_only.clone()
    } else {
        fg.difference(band)
    }
}

/// The offset window Ω, ordered by `(|di| + |dj|, di, dj)`.
pub fn offset_window(max_offset: u32) -> Vec<(i32, i32)> {
    l1_offsets(1, max_offset)
}

fn lands(
    p: PatchCoord,
    off: (i32, i32),
    opp: &PatchSet,
    grid: &PatchGrid,
    band: &PatchSet,
) -> Option<PatchCoord> {
    let q = p.offset(off.0, off.1);
    (grid.contains(q) && opp.contains(&q) && !band.contains(&q)).then_some(q)
}

/// Shared shift that sends the most region patches onto in-grid,
/// non-band `opp` patches. Returns the offset and its hit count, or `None`
/// when no offset hits anything. Ties go to the smallest
/// `(|di| + |dj|, di, dj)`.
pub fn best_offset(
    region: &PatchSet,
    opp: &PatchSet,
    max_offset: u32,
    grid: &PatchGrid,
    band: &PatchSet,
) -> Option<((i32, i32), usize)> {
    let mut best: Option<((i32, i32), usize)> = None;
    for off in offset_window(max_offset) {
        let count = region
            .iter()
            .filter(|p| lands(**p, off, opp, grid, band).is_some())
            .count();
        if count > best.map_or(0, |(_, c)| c) {
            best = Some((off, count));
        }
    }
    best
}

/// `p + offset` when that lands on a valid opposite patch, else the
/// L1-nearest patch of `opp`.
pub fn offset_or_nearest(
    p: PatchCoord,
    offset: Option<(i32, i32)>,
    opp: &PatchSet,
    grid: &PatchGrid,
    band: &PatchSet,
) -> Result<PatchCoord, ToolError> {
    if let Some(q) = offset.and_then(|off| lands(p, off, opp, grid, band)) {
        return Ok(q);
    }
    opp.nearest(p).ok_or(ToolError::NoReference)
}

/// Intermediate results of a fuse call, kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct FuseOutcome {
    pub mapping: PatchMapping,
    pub band: PatchSet,
    pub seeds: Vec<PatchCoord>,
    /// Number of leading pairs that are forward (band) pairs; the rest are
    /// mirrored pairs.
    pub forward_len: usize,
    /// Regions skipped because their opposite pool was empty.
    pub skipped_regions: usize,
}

/// Fuses entity A into entity B (and vice versa) along their overlap.
pub fn fuse_tool<R: Rng + ?Sized>(
    ent_a: &PatchSet,
    ent_b: &PatchSet,
    params: &FuseParams,
    grid: &PatchGrid,
    rng: &mut R,
) -> Result<PatchMapping, ToolError> {
    Ok(fuse_detailed(ent_a, ent_b, params, grid, rng)?.mapping)
}

pub fn fuse_detailed<R: Rng + ?Sized>(
    ent_a: &PatchSet,
    ent_b: &PatchSet,
    params: &FuseParams,
    grid: &PatchGrid,
    rng: &mut R,
) -> Result<FuseOutcome, ToolError> {
    params.validate()?;
    require_in_grid(ent_a, grid)?;
    require_in_grid(ent_b, grid)?;
    let empty = |band: PatchSet| FuseOutcome {
        mapping: PatchMapping::empty(*grid, Tool::Fuse),
        band,
        seeds: Vec::new(),
        forward_len: 0,
        skipped_regions: 0,
    };
    let overlap = ent_a.intersection(ent_b);
    if overlap.is_empty() {
        return Ok(empty(PatchSet::new()));
    }
    let fg = ent_a.union(ent_b);
    let a_only = ent_a.difference(&overlap);
    let b_only = ent_b.difference(&overlap);
    let band = overlap_fusion_band(&overlap, &fg, params.band_radius, grid);
    if band.is_empty() {
        return Ok(empty(band));
    }

    let seeds = farthest_point_sampling(&band, params.seeds as usize);
    let mut regions = vec![PatchSet::new(); seeds.len()];
    for p in &band {
        // Nearest seed; ties go to the earlier seed.
        let (idx, _) = seeds
            .iter()
            .enumerate()
            .min_by_key(|(i, s)| (p.l1(**s), *i))
            .expect("seeds non-empty");
        regions[idx].insert(*p);
    }

    let mut pairs = Vec::new();
    let mut skipped = 0;
    for (seed, region) in seeds.iter().zip(&regions) {
        if region.is_empty() {
            continue;
        }
        let opp = opposite_region(*seed, &a_only, &b_only, &fg, &band);
        if opp.is_empty() {
            skipped += 1;
            continue;
        }
        let off = best_offset(region, &opp, params.max_offset, grid, &band).map(|(o, _)| o);
        for p in region {
            pairs.push((*p, offset_or_nearest(*p, off, &opp, grid, &band)?));
        }
    }
    let forward_len = pairs.len();

    let n_rev = (params.reversed_fraction * forward_len as f64).round() as usize;
    if n_rev > 0 {
        let mut picked =
            rand::seq::index::sample(rng, forward_len, n_rev.min(forward_len)).into_vec();
        picked.sort_unstable();
        let mut targets: BTreeSet<PatchCoord> = pairs.iter().map(|(t, _)| *t).collect();
        for i in picked {
            let (t, r) = pairs[i];
            if targets.insert(r) {
                pairs.push((r, t));
            }
        }
    }

    Ok(FuseOutcome {
        mapping: PatchMapping::new(*grid, Tool::Fuse, pairs)?,
        band,
        seeds,
        forward_len,
        skipped_regions: skipped,
    })
}
