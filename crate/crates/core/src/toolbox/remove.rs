use crate::grid::{PatchGrid, PatchMapping, PatchSet, Tool};

use super::{l1_offsets, require_in_grid, RemoveParams, SceneContext, ToolError};

/// In-grid patches within L1 distance `radius` of any target, minus the
/// targets themselves.
pub fn local_neighborhood(targets: &PatchSet, radius: u32, grid: &PatchGrid) -> PatchSet {
    let offsets = l1_offsets(1, radius);
    let mut nbr = PatchSet::new();
    for t in targets {
        for &(dr, dc) in &offsets {
            let p = t.offset(dr, dc);
            if grid.contains(p) && !targets.contains(&p) {
                nbr.insert(p);
            }
        }
    }
    nbr
}

/// Reference pool for [`remove_tool`].
///
/// True background (`nbr \ ent \ sub`) is used when it makes up more than
/// half of the non-subentity neighbourhood; otherwise the pool falls back to
/// `nbr \ sub`, which may include entity foreground. Neither pool contains
/// other same-label subentity patches.
pub fn remove_pool(
    targets: &PatchSet,
    ctx: &SceneContext,
    radius: u32,
    grid: &PatchGrid,
) -> PatchSet {
    let nbr = local_neighborhood(targets, radius, grid);
    let no_sub = nbr.difference(&ctx.sub);
    let non_ent = no_sub.difference(&ctx.ent);
    if 2 * non_ent.len() > no_sub.len() {
        non_ent
    } else {
        no_sub
    }
}

/// Maps every target onto its L1-nearest pool patch.
pub fn remove_tool(
    targets: &PatchSet,
    ctx: &SceneContext,
    params: &RemoveParams,
    grid: &PatchGrid,
) -> Result<PatchMapping, ToolError> {
    params.validate()?;
    if targets.is_empty() {
        return Err(ToolError::EmptyInput);
    }
    require_in_grid(targets, grid)?;
    let pool = remove_pool(targets, ctx, params.radius, grid);
    if pool.is_empty() {
        return Err(ToolError::NoReference);
    }
    let pairs = targets
        .iter()
        .map(|&t| (t, pool.nearest(t).expect("pool is non-empty")))
        .collect();
    Ok(PatchMapping::new(*grid, Tool::Remove, pairs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PatchCoord;

    fn grid(n: u32) -> PatchGrid {
        PatchGrid::new(n, n, 1).unwrap()
    }

    #[test]
    fn neighborhood_examples() {
        let g = grid(5);
        assert_eq!(
            local_neighborhood(&PatchSet::from([(2, 2)]), 1, &g),
            PatchSet::from([(1, 2), (3, 2), (2, 1), (2, 3)])
        );
        assert_eq!(
            local_neighborhood(&PatchSet::from([(0, 0)]), 1, &g),
            PatchSet::from([(1, 0), (0, 1)])
        );
        let two = local_neighborhood(&PatchSet::from([(2, 2), (2, 3)]), 1, &g);
        assert_eq!(
            two,
            PatchSet::from([(1, 2), (3, 2), (2, 1), (1, 3), (3, 3), (2, 4)])
        );
    }

    #[test]
    fn single_target_maps_to_first_nearest() {
        let g = grid(5);
        let ctx = SceneContext {
            ent: PatchSet::from([(2, 2)]),
            sub: PatchSet::new(),
        };
        let m = remove_tool(
            &PatchSet::from([(2, 2)]),
            &ctx,
            &RemoveParams { radius: 1 },
            &g,
        )
        .unwrap();
        assert_eq!(m.pairs(), &[(PatchCoord::new(2, 2), PatchCoord::new(1, 2))]);
    }

    #[test]
    fn surrounded_targets_share_the_only_free_cell() {
        // Targets: 2x2 block at (2..4, 2..4). Every neighbour within R=1 is
        // another same-label instance except (1, 2).
        let g = grid(6);
        let targets = PatchSet::from([(2, 2), (2, 3), (3, 2), (3, 3)]);
        let mut sub = local_neighborhood(&targets, 1, &g);
        sub.remove(&PatchCoord::new(1, 2));
        let ctx = SceneContext {
            ent: targets.clone(),
            sub,
        };
        let m = remove_tool(&targets, &ctx, &RemoveParams { radius: 1 }, &g).unwrap();
        assert!(m.pairs().iter().all(|(_, r)| *r == PatchCoord::new(1, 2)));
        assert_eq!(m.len(), 4);
    }

    #[test]
    fn falls_back_to_entity_foreground() {
        // Whole neighbourhood is entity: no true background available.
        let g = grid(5);
        let targets = PatchSet::from([(2, 2)]);
        let ctx = SceneContext {
            ent: g.coords().collect(),
            sub: PatchSet::new(),
        };
        let pool = remove_pool(&targets, &ctx, 1, &g);
        assert_eq!(pool.len(), 4);
    }

    #[test]
    fn empty_pool_is_an_error() {
        let g = grid(1);
        assert_eq!(
            remove_tool(
                &PatchSet::from([(0, 0)]),
                &SceneContext::default(),
                &RemoveParams { radius: 1 },
                &g
            ),
            Err(ToolError::NoReference)
        );
        assert_eq!(
            remove_tool(
                &PatchSet::new(),
                &SceneContext::default(),
                &RemoveParams { radius: 1 },
                &g
            ),
            Err(ToolError::EmptyInput)
        );
    }
}
