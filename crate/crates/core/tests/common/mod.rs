//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use patchforge::grid::{PatchCoord, PatchGrid, PatchMapping, PatchSet};
use patchforge::toolbox::{AddParams, SceneContext};
use rand::Rng;

/// A random subentity with its entity and same-label context.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub grid: PatchGrid,
    pub refs: PatchSet,
    pub ctx: SceneContext,
}

pub fn l1(a: PatchCoord, b: PatchCoord) -> u32 {
    a.row.abs_diff(b.row) + a.col.abs_diff(b.col)
}

pub fn random_grid<R: Rng>(rng: &mut R, max_side: u32) -> PatchGrid {
    PatchGrid::new(
        rng.random_range(2..=max_side),
        rng.random_range(2..=max_side),
        1,
    )
    .unwrap()
}

/// Random rectangle-ish blob grown from a seed cell.
pub fn random_blob<R: Rng>(rng: &mut R, grid: &PatchGrid, max_cells: usize) -> PatchSet {
    let start = PatchCoord::new(
        rng.random_range(0..grid.rows() as i32),
        rng.random_range(0..grid.cols() as i32),
    );
    let mut set = PatchSet::from_iter([start]);
    let target = rng.random_range(1..=max_cells);
    let mut tries = 0;
    while set.len() < target && tries < 8 * max_cells {
        tries += 1;
        let cells = set.to_vec();
        let from = cells[rng.random_range(0..cells.len())];
        let (dr, dc) = [(0, 1), (0, -1), (1, 0), (-1, 0)][rng.random_range(0..4)];
        let next = from.offset(dr, dc);
        if grid.contains(next) {
            set.insert(next);
        }
    }
    set
}

pub fn random_subset<R: Rng>(rng: &mut R, grid: &PatchGrid, p: f64) -> PatchSet {
    grid.coords().filter(|_| rng.random_bool(p)).collect()
}

pub fn random_fixture<R: Rng>(rng: &mut R, max_side: u32) -> Fixture {
    let grid = random_grid(rng, max_side);
    let refs = random_blob(rng, &grid, 6);
    let ent = refs.union(&random_blob(rng, &grid, 20));
    let sub = random_subset(rng, &grid, 0.1).difference(&refs);
    Fixture {
        grid,
        refs,
        ctx: SceneContext { ent, sub },
    }
}

pub fn nearest_brute(pool: &PatchSet, p: PatchCoord) -> Option<PatchCoord> {
    let mut best: Option<PatchCoord> = None;
    for &q in pool.iter() {
        best = match best {
            Some(b) if (l1(b, p), b) <= (l1(q, p), q) => Some(b),
            _ => Some(q),
        };
    }
    best
}

/// Exhaustive add placement: every in-grid cell at L1 distance 1..=alpha
/// from the rounded centroid, scored from scratch.
pub fn add_oracle(f: &Fixture, params: &AddParams) -> Option<Vec<(PatchCoord, PatchCoord)>> {
    let refs = f.refs.to_vec();
    let n = refs.len() as f64;
    let mean = |axis: fn(&PatchCoord) -> i32| {
        (refs.iter().map(axis).sum::<i32>() as f64 / n).round() as i32
    };
    let center = PatchCoord::new(mean(|p| p.row), mean(|p| p.col));
    let mut scored: Vec<(f64, PatchCoord)> = Vec::new();
    for cell in f.grid.coords() {
        let d = l1(cell, center);
        if d < 1 || d > params.alpha {
            continue;
        }
        let (dr, dc) = (cell.row - center.row, cell.col - center.col);
        let mut hits = [0usize; 3];
        for r in &refs {
            let s = r.offset(dr, dc);
            hits[0] += f.refs.contains(&s) as usize;
            hits[1] += (f.ctx.ent.contains(&s) && !f.refs.contains(&s)) as usize;
            hits[2] += f.ctx.sub.contains(&s) as usize;
        }
        let ratio_sum: f64 = hits.iter().map(|h| *h as f64 / n).sum();
        scored.push((
            (3.0 - ratio_sum) / (1.0 + params.lambda_dist * d as f64),
            cell,
        ));
    }
    let max = scored.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * max.abs().max(1.0);
    let best = scored
        .iter()
        .filter(|s| s.0 >= max - tol)
        .map(|s| s.1)
        .min()?;
    let (dr, dc) = (best.row - center.row, best.col - center.col);
    Some(
        refs.iter()
            .map(|r| (r.offset(dr, dc), *r))
            .filter(|(t, _)| f.grid.contains(*t))
            .collect(),
    )
}

/// Brute-force remove: neighbourhood by scanning the whole grid.
pub fn remove_oracle(
    f: &Fixture,
    targets: &PatchSet,
    radius: u32,
) -> Option<Vec<(PatchCoord, PatchCoord)>> {
    let nbr: PatchSet = f
        .grid
        .coords()
        .filter(|c| !targets.contains(c) && targets.iter().any(|t| l1(*t, *c) <= radius))
        .collect();
    let no_sub: PatchSet = nbr
        .iter()
        .filter(|c| !f.ctx.sub.contains(c))
        .copied()
        .collect();
    let non_ent: PatchSet = no_sub
        .iter()
        .filter(|c| !f.ctx.ent.contains(c))
        .copied()
        .collect();
    let pool = if 2 * non_ent.len() > no_sub.len() {
        non_ent
    } else {
        no_sub
    };
    if pool.is_empty() {
        return None;
    }
    Some(
        targets
            .iter()
            .map(|t| (*t, nearest_brute(&pool, *t).unwrap()))
            .collect(),
    )
}

/// Exhaustive offset search over the L1 window.
pub fn best_offset_oracle(
    region: &PatchSet,
    opp: &PatchSet,
    max_offset: u32,
    grid: &PatchGrid,
    band: &PatchSet,
) -> Option<((i32, i32), usize)> {
    let m = max_offset as i32;
    let mut best: Option<(usize, (u32, i32, i32))> = None;
    for di in -m..=m {
        for dj in -m..=m {
            let n = di.unsigned_abs() + dj.unsigned_abs();
            if n < 1 || n > max_offset {
                continue;
            }
            let count = region
                .iter()
                .filter(|p| {
                    let q = p.offset(di, dj);
                    grid.contains(q) && opp.contains(&q) && !band.contains(&q)
                })
                .count();
            let key = (n, di, dj);
            best = match best {
                Some((c, k)) if c > count || (c == count && k < key) => Some((c, k)),
                _ => Some((count, key)),
            };
        }
    }
    best.filter(|(c, _)| *c > 0)
        .map(|(c, (_, di, dj))| ((di, dj), c))
}

/// Greedy max-min selection recomputed from scratch at every step.
pub fn fps_oracle(pts: &PatchSet, k: usize) -> Vec<PatchCoord> {
    let points = pts.to_vec();
    if points.is_empty() || k == 0 {
        return Vec::new();
    }
    let n = points.len() as i64;
    let (sr, sc) = points.iter().fold((0i64, 0i64), |(r, c), p| {
        (r + p.row as i64, c + p.col as i64)
    });
    let first = points
        .iter()
        .copied()
        .min_by_key(|p| {
            (
                (n * p.row as i64 - sr).abs() + (n * p.col as i64 - sc).abs(),
                *p,
            )
        })
        .unwrap();
    let mut seeds = vec![first];
    while seeds.len() < k.min(points.len()) {
        let next = points
            .iter()
            .copied()
            .map(|p| (seeds.iter().map(|s| l1(p, *s)).min().unwrap(), p))
            .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
            .unwrap();
        seeds.push(next.1);
    }
    seeds
}

/// Smallest achievable covering radius with `k` centres chosen from `pts`.
pub fn optimal_cover_radius(pts: &PatchSet, k: usize) -> u32 {
    let points = pts.to_vec();
    let n = points.len();
    let mut best = u32::MAX;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k.min(n) {
            continue;
        }
        let centres: Vec<PatchCoord> = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| points[i])
            .collect();
        let r = points
            .iter()
            .map(|p| centres.iter().map(|c| l1(*p, *c)).min().unwrap())
            .max()
            .unwrap();
        best = best.min(r);
    }
    best
}

pub fn cover_radius(pts: &PatchSet, seeds: &[PatchCoord]) -> u32 {
    pts.iter()
        .map(|p| seeds.iter().map(|s| l1(*p, *s)).min().unwrap())
        .max()
        .unwrap_or(0)
}

/// Target uniqueness and in-grid coordinates, checked without trusting
/// the mapping constructor.
pub fn check_mapping_basics(m: &PatchMapping) -> Result<(), String> {
    let g = m.grid();
    let mut seen = BTreeMap::new();
    for (i, (t, r)) in m.pairs().iter().enumerate() {
        if !g.contains(*t) || !g.contains(*r) {
            return Err(format!("pair {i} ({t}, {r}) leaves the grid"));
        }
        if let Some(j) = seen.insert(*t, i) {
            return Err(format!("target {t} repeated at pairs {j} and {i}"));
        }
    }
    Ok(())
}

/// Every file under `root`, keyed by relative path.
pub fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}
