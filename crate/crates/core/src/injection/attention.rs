use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::grid::{PatchCoord, PatchGrid, PatchMapping};

use super::rope::{rope_apply, DEFAULT_ROPE_BASE};
use super::InjectionError;

/// Single-head self-attention over the patches of one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyAttentionLayer {
    grid: PatchGrid,
    w_q: DMatrix<f64>,
    w_k: DMatrix<f64>,
    w_v: DMatrix<f64>,
    rope_base: f64,
}

impl ToyAttentionLayer {
    pub fn new(
        grid: PatchGrid,
        w_q: DMatrix<f64>,
        w_k: DMatrix<f64>,
        w_v: DMatrix<f64>,
        rope_base: f64,
    ) -> Result<Self, InjectionError> {
        let d = w_q.nrows();
        if d == 0 || !d.is_multiple_of(2) {
            return Err(InjectionError::OddDimension(d));
        }
        for (name, m) in [("w_q", &w_q), ("w_k", &w_k), ("w_v", &w_v)] {
            if m.shape() != (d, d) {
                return Err(InjectionError::Shape(format!(
                    "{name} is {:?}, expected ({d}, {d})",
                    m.shape()
                )));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(InjectionError::NonFinite(name));
            }
        }
        if !(rope_base > 0.0 && rope_base.is_finite()) {
            return Err(InjectionError::Shape(format!(
                "rope_base must be positive, got {rope_base}"
            )));
        }
        Ok(Self {
            grid,
            w_q,
            w_k,
            w_v,
            rope_base,
        })
    }

    /// Weights drawn from N(0, 1/d).
    pub fn random<R: Rng + ?Sized>(
        grid: PatchGrid,
        dim: usize,
        rng: &mut R,
    ) -> Result<Self, InjectionError> {
        let scale = 1.0 / (dim.max(1) as f64).sqrt();
        let mut draw = || {
            DMatrix::from_fn(dim, dim, |_, _| {
                let z: f64 = StandardNormal.sample(rng);
                scale * z
            })
        };
        let (w_q, w_k, w_v) = (draw(), draw(), draw());
        Self::new(grid, w_q, w_k, w_v, DEFAULT_ROPE_BASE)
    }

    pub fn grid(&self) -> PatchGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.w_q.nrows()
    }

    pub fn n_patches(&self) -> usize {
        self.grid.len()
    }

    pub fn w_q(&self) -> &DMatrix<f64> {
        &self.w_q
    }

    pub fn w_k(&self) -> &DMatrix<f64> {
        &self.w_k
    }

    pub fn w_v(&self) -> &DMatrix<f64> {
        &self.w_v
    }

    pub fn rope_base(&self) -> f64 {
        self.rope_base
    }

    fn check_input(&self, x: &DMatrix<f64>) -> Result<(), InjectionError> {
        if x.shape() != (self.n_patches(), self.dim()) {
            return Err(InjectionError::Shape(format!(
                "input is {:?}, expected ({}, {})",
                x.shape(),
                self.n_patches(),
                self.dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(InjectionError::NonFinite("input"));
        }
        Ok(())
    }

    fn rotate_rows(
        &self,
        m: &DMatrix<f64>,
        positions: &[PatchCoord],
    ) -> Result<DMatrix<f64>, InjectionError> {
        let mut out = m.clone();
        for (i, pos) in positions.iter().enumerate() {
            let row: Vec<f64> = m.row(i).iter().copied().collect();
            let rotated = rope_apply(&row, *pos, self.rope_base)?;
            for (j, v) in rotated.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }
}

/// Per-layer value embeddings from the inversion pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueCache {
    pub v_inv: DMatrix<f64>,
}

/// Everything computed inside one attention call.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTrace {
    /// Rotated queries and keys.
    pub q: DMatrix<f64>,
    pub k: DMatrix<f64>,
    /// Values entering the weighted sum.
    pub v: DMatrix<f64>,
    pub weights: DMatrix<f64>,
    pub output: DMatrix<f64>,
    /// Position used to rotate each row.
    pub positions: Vec<PatchCoord>,
}

/// Row-wise numerically stable softmax.
pub fn softmax_rows(logits: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = logits.clone();
    for mut row in out.row_iter_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.iter_mut().for_each(|v| *v = (*v - max).exp());
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

fn attend(
    layer: &ToyAttentionLayer,
    x: &DMatrix<f64>,
    positions: Vec<PatchCoord>,
    v: DMatrix<f64>,
) -> Result<AttentionTrace, InjectionError> {
    let q = layer.rotate_rows(&(x * &layer.w_q), &positions)?;
    let k = layer.rotate_rows(&(x * &layer.w_k), &positions)?;
    let logits = (&q * k.transpose()) / (layer.dim() as f64).sqrt();
    let weights = softmax_rows(&logits);
    let output = &weights * &v;
    Ok(AttentionTrace {
        q,
        k,
        v,
        weights,
        output,
        positions,
    })
}

/// Plain RoPE attention; caches `X W_V`.
pub fn attention_inversion_pass(
    layer: &ToyAttentionLayer,
    x: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, ValueCache), InjectionError> {
    layer.check_input(x)?;
    let v = x * &layer.w_v;
    let positions = layer.grid.coords().collect();
    let trace = attend(layer, x, positions, v.clone())?;
    Ok((trace.output, ValueCache { v_inv: v }))
}

/// Attention with target positions and values rewritten from `mapping`.
///
/// Targets rotate Q/K with their reference's position when `pe_on`, and take
/// the reference's cached value row when `value_on`. Background rows always
/// keep their own position and take their own cached value row.
pub fn attention_injection_traced(
    layer: &ToyAttentionLayer,
    x: &DMatrix<f64>,
    cache: &ValueCache,
    mapping: &PatchMapping,
    pe_on: bool,
    value_on: bool,
) -> Result<AttentionTrace, InjectionError> {
    layer.check_input(x)?;
    if cache.v_inv.shape() != x.shape() {
        return Err(InjectionError::Shape(format!(
            "cache is {:?}, input is {:?}",
            cache.v_inv.shape(),
            x.shape()
        )));
    }
    if mapping.grid() != layer.grid {
        return Err(InjectionError::Shape(
            "mapping grid differs from layer grid".into(),
        ));
    }
    let table = mapping.reference_table();
    let fresh = x * &layer.w_v;
    let mut v = fresh.clone();
    let mut positions: Vec<PatchCoord> = layer.grid.coords().collect();
    for (i, r) in table.iter().enumerate() {
        match r {
            None => v.set_row(i, &cache.v_inv.row(i)),
            Some(r) => {
                if pe_on {
                    positions[i] = layer.grid.from_linear(*r)?;
                }
                if value_on {
                    v.set_row(i, &cache.v_inv.row(*r));
                }
            }
        }
    }
    attend(layer, x, positions, v)
}

pub fn attention_injection_pass(
    layer: &ToyAttentionLayer,
    x: &DMatrix<f64>,
    cache: &ValueCache,
    mapping: &PatchMapping,
    pe_on: bool,
    value_on: bool,
) -> Result<DMatrix<f64>, InjectionError> {
    Ok(attention_injection_traced(layer, x, cache, mapping, pe_on, value_on)?.output)
}
