use crate::grid::PatchCoord;

use super::InjectionError;

pub const DEFAULT_ROPE_BASE: f64 = 10_000.0;

/// Frequency of pair `i` in an axis block of `half` dims.
pub fn rope_theta(i: usize, half: usize, base: f64) -> f64 {
    base.powf(-2.0 * i as f64 / half as f64)
}

fn rotate_block(block: &mut [f64], pos: i32, base: f64) {
    let half = block.len();
    for i in 0..half / 2 {
        let angle = pos as f64 * rope_theta(i, half, base);
        let (s, c) = angle.sin_cos();
        let (a, b) = (block[2 * i], block[2 * i + 1]);
        block[2 * i] = a * c - b * s;
        block[2 * i + 1] = a * s + b * c;
    }
}

/// 2D axial rotary embedding.
///
/// The first `d/2` entries rotate in consecutive pairs by `row * θ_i`, the
/// second `d/2` by `col * θ_i`. When `d/2` is odd the last entry of each half
/// is left as is.
pub fn rope_apply(v: &[f64], pos: PatchCoord, base: f64) -> Result<Vec<f64>, InjectionError> {
    if !v.len().is_multiple_of(2) {
        return Err(InjectionError::OddDimension(v.len()));
    }
    let mut out = v.to_vec();
    let half = v.len() / 2;
    let (rows, cols) = out.split_at_mut(half);
    rotate_block(rows, pos.row, base);
    rotate_block(cols, pos.col, base);
    Ok(out)
}
