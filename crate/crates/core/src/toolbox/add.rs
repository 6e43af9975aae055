use crate::grid::{PatchCoord, PatchGrid, PatchMapping, PatchSet, Tool};

use super::{l1_offsets, require_in_grid, AddParams, SceneContext, ToolError};

/// Relative tolerance under which two placement scores count as tied.
const SCORE_TIE_EPS: f64 = 1e-12;

/// Mean patch position, each axis rounded half away from zero.
pub fn centroid(refs: &PatchSet) -> Result<PatchCoord, ToolError> {
    if refs.is_empty() {
        return Err(ToolError::EmptyInput);
    }
    let n = refs.len() as f64;
    let (sr, sc) = refs.iter().fold((0i64, 0i64), |(r, c), p| {
        (r + p.row as i64, c + p.col as i64)
    });
    Ok(PatchCoord::new(
        (sr as f64 / n).round() as i32,
        (sc as f64 / n).round() as i32,
    ))
}

/// Cells with `1 <= L1(cell, center) <= alpha`, clipped (discarded) to the grid.
pub fn perimeter_band(center: PatchCoord, alpha: u32, grid: &PatchGrid) -> PatchSet {
    grid.clip_candidates(
        l1_offsets(1, alpha)
            .into_iter()
            .map(|(dr, dc)| center.offset(dr, dc)),
    )
}

/// Score breakdown for one candidate placement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AddCandidate {
    pub cell: PatchCoord,
    pub offset: (i32, i32),
    pub r_self: f64,
    pub r_ent: f64,
    pub r_sub: f64,
    pub score: f64,
}

/// Scores every ring cell, in lexicographic cell order.
///
/// Ratios are taken over the full shifted set, including shifted patches
/// that fall off the grid.
pub fn add_scores(
    refs: &PatchSet,
    ctx: &SceneContext,
    params: &AddParams,
    grid: &PatchGrid,
) -> Result<Vec<AddCandidate>, ToolError> {
    params.validate()?;
    require_in_grid(refs, grid)?;
    let center = centroid(refs)?;
    let ring = perimeter_band(center, params.alpha, grid);
    let ent_only = ctx.ent.difference(refs);
    let n = refs.len() as f64;
    Ok(ring
        .iter()
        .map(|&cell| {
            let (dr, dc) = (cell.row - center.row, cell.col - center.col);
            let (mut hit_self, mut hit_ent, mut hit_sub) = (0usize, 0usize, 0usize);
            for r in refs {
                let s = r.offset(dr, dc);
                hit_self += refs.contains(&s) as usize;
                hit_ent += ent_only.contains(&s) as usize;
                hit_sub += ctx.sub.contains(&s) as usize;
            }
            let (r_self, r_ent, r_sub) =
                (hit_self as f64 / n, hit_ent as f64 / n, hit_sub as f64 / n);
            let d = (dr.unsigned_abs() + dc.unsigned_abs()) as f64;
            let g_dist = 1.0 / (1.0 + params.lambda_dist * d);
            AddCandidate {
                cell,
                offset: (dr, dc),
                r_self,
                r_ent,
                r_sub,
                score: (3.0 - r_self - r_ent - r_sub) * g_dist,
            }
        })
        .collect())
}

/// Duplicates the subentity `refs` at the best-scoring ring placement.
///
/// Pairs are `(r + offset, r)`; shifted targets that leave the grid are
/// dropped.
pub fn add_tool(
    refs: &PatchSet,
    ctx: &SceneContext,
    params: &AddParams,
    grid: &PatchGrid,
) -> Result<PatchMapping, ToolError> {
    let scored = add_scores(refs, ctx, params, grid)?;
    let best = pick_best(&scored).ok_or(ToolError::NoCandidate)?;
    let (dr, dc) = best.offset;
    let pairs = refs
        .iter()
        .map(|&r| (r.offset(dr, dc), r))
        .filter(|(t, _)| grid.contains(*t))
        .collect();
    Ok(PatchMapping::new(*grid, Tool::Add, pairs)?)
}

fn pick_best(scored: &[AddCandidate]) -> Option<AddCandidate> {
    let max = scored
        .iter()
        .map(|c| c.score)
        .fold(f64::NEG_INFINITY, f64::max);
    let tol = SCORE_TIE_EPS * max.abs().max(1.0);
    scored.iter().find(|c| c.score >= max - tol).copied()
}
