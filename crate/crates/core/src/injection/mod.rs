//! Applying patch mappings.
//!
//! [`render_pixel_oracle`] copies reference pixel blocks onto targets and is
//! exact at `blend = 0`. The attention verifier ([`ToyAttentionLayer`] and
//! friends) runs the positional/value rewrite on a single RoPE attention
//! layer so the contract can be checked numerically.

mod attention;
mod pixel;
mod rope;
mod schedule;

use std::path::PathBuf;

use thiserror::Error;

use crate::grid::GridError;

pub use attention::{
    attention_injection_pass, attention_injection_traced, attention_inversion_pass, softmax_rows,
    AttentionTrace, ToyAttentionLayer, ValueCache,
};
pub use pixel::{render_pixel_oracle, PixelImage};
pub use rope::{rope_apply, rope_theta, DEFAULT_ROPE_BASE};
pub use schedule::{schedule_gates, InjectionSchedule, PeDisabledSteps, ScheduleSnapshot};

#[derive(Debug, Error)]
pub enum InjectionError {
    #[error("vector dimension {0} is odd")]
    OddDimension(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("image is {found_w}x{found_h}, expected {want_w}x{want_h}")]
    Dimensions {
        want_w: u32,
        want_h: u32,
        found_w: u32,
        found_h: u32,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("{}: {message}", path.display())]
    Image { path: PathBuf, message: String },
}
