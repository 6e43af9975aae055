//! COCO run-length encoding.
//!
//! Masks are flattened column-major (`index = x * height + y`) and stored as
//! alternating run lengths starting with a run of zeros. The compressed
//! string form packs each count into 5-bit groups offset by ASCII `'0'`,
//! with bit `0x20` as the continuation flag and the top bit of the last
//! group as the sign; counts after the second are stored as deltas against
//! the count two positions earlier.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::mask::BinaryMask;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RleError {
    #[error("byte {byte:#04x} at offset {offset} is outside the RLE alphabet")]
    BadByte { offset: usize, byte: u8 },
    #[error("truncated count at offset {0}")]
    Truncated(usize),
    #[error("count at index {0} is negative or overflows")]
    BadCount(usize),
    #[error("run lengths sum to {sum}, expected {expected} pixels")]
    LengthMismatch { sum: u64, expected: u64 },
    #[error("mask size {height}x{width} is too large")]
    TooLarge { height: u32, width: u32 },
}

/// Largest pixel count accepted from untrusted input (1 GiB of pixels).
const MAX_PIXELS: u64 = 1 << 30;

/// The `{size: [H, W], counts: "..."}` annotation entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CocoRle {
    pub size: [u32; 2],
    pub counts: String,
}

/// Decoded run lengths for an `height x width` mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rle {
    pub height: u32,
    pub width: u32,
    pub counts: Vec<u32>,
}

impl Rle {
    pub fn pixel_count(&self) -> u64 {
        self.height as u64 * self.width as u64
    }

    /// Parses a compressed counts string and checks that the runs cover the
    /// mask exactly.
    pub fn from_coco_string(height: u32, width: u32, s: &str) -> Result<Self, RleError> {
        let expected = height as u64 * width as u64;
        if expected > MAX_PIXELS {
            return Err(RleError::TooLarge { height, width });
        }
        let bytes = s.as_bytes();
        let mut counts: Vec<u32> = Vec::new();
        let mut p = 0usize;
        let mut sum = 0u64;
        while p < bytes.len() {
            let mut x: i64 = 0;
            let mut k = 0u32;
            loop {
                let Some(&b) = bytes.get(p) else {
                    return Err(RleError::Truncated(p));
                };
                if !(48..48 + 64).contains(&b) {
                    return Err(RleError::BadByte { offset: p, byte: b });
                }
                // Seven groups already cover 35 bits; anything longer cannot
                // be a valid u32 count.
                if k >= 7 {
                    return Err(RleError::BadCount(counts.len()));
                }
                let c = (b - 48) as i64;
                x |= (c & 0x1f) << (5 * k);
                p += 1;
                k += 1;
                if c & 0x20 == 0 {
                    if c & 0x10 != 0 {
                        x |= -1i64 << (5 * k);
                    }
                    break;
                }
            }
            let m = counts.len();
            if m > 2 {
                x += counts[m - 2] as i64;
            }
            if x < 0 || x > u32::MAX as i64 {
                return Err(RleError::BadCount(m));
            }
            sum += x as u64;
            if sum > expected {
                return Err(RleError::LengthMismatch { sum, expected });
            }
            counts.push(x as u32);
        }
        if sum != expected {
            return Err(RleError::LengthMismatch { sum, expected });
        }
        Ok(Self {
            height,
            width,
            counts,
        })
    }

    pub fn from_coco(entry: &CocoRle) -> Result<Self, RleError> {
        Self::from_coco_string(entry.size[0], entry.size[1], &entry.counts)
    }

    pub fn to_coco_string(&self) -> String {
        let mut out = String::new();
        for i in 0..self.counts.len() {
            let mut x = self.counts[i] as i64;
            if i > 2 {
                x -= self.counts[i - 2] as i64;
            }
            loop {
                let mut c = x & 0x1f;
                x >>= 5;
                let more = if c & 0x10 != 0 { x != -1 } else { x != 0 };
                if more {
                    c |= 0x20;
                }
                out.push((c as u8 + 48) as char);
                if !more {
                    break;
                }
            }
        }
        out
    }

    pub fn to_coco(&self) -> CocoRle {
        CocoRle {
            size: [self.height, self.width],
            counts: self.to_coco_string(),
        }
    }

    pub fn encode(mask: &BinaryMask) -> Self {
        let (w, h) = (mask.width(), mask.height());
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for x in 0..w {
            for y in 0..h {
                let v = mask.get(x, y);
                if v != current {
                    counts.push(run);
                    run = 0;
                    current = v;
                }
                run += 1;
            }
        }
        counts.push(run);
        Self {
            height: h,
            width: w,
            counts,
        }
    }

    pub fn decode(&self) -> BinaryMask {
        let (w, h) = (self.width, self.height);
        let mut mask = BinaryMask::new(w, h);
        let mut idx = 0u64;
        let mut value = false;
        for &run in &self.counts {
            if value {
                for i in idx..idx + run as u64 {
                    let x = (i / h as u64) as u32;
                    let y = (i % h as u64) as u32;
                    mask.set(x, y, true);
                }
            }
            idx += run as u64;
            value = !value;
        }
        mask
    }
}
