use serde::{Deserialize, Serialize};

use super::raster::BinaryPixelMap;
use super::EvalError;

/// Pixel confusion counts between a prediction and a reference map.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl std::ops::Add for PixelCounts {
    type Output = PixelCounts;

    fn add(self, o: PixelCounts) -> PixelCounts {
        PixelCounts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl PixelCounts {
    pub fn between(pred: &BinaryPixelMap, gt: &BinaryPixelMap) -> Result<Self, EvalError> {
        pred.same_dims(gt)?;
        let mut c = PixelCounts::default();
        for (p, g) in pred.bits().iter().zip(gt.bits()) {
            match (p, g) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => {}
            }
        }
        Ok(c)
    }

    /// IoU and F1; both 1.0 when neither map has a pixel set.
    pub fn scores(&self) -> LocalizationScores {
        let err = self.fp + self.fn_;
        if self.tp + err == 0 {
            return LocalizationScores { iou: 1.0, f1: 1.0 };
        }
        let tp = self.tp as f64;
        LocalizationScores {
            iou: tp / (tp + err as f64),
            f1: 2.0 * tp / (2.0 * tp + err as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationScores {
    pub iou: f64,
    pub f1: f64,
}

pub fn localization_metrics(
    pred: &BinaryPixelMap,
    gt: &BinaryPixelMap,
) -> Result<LocalizationScores, EvalError> {
    Ok(PixelCounts::between(pred, gt)?.scores())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryScores {
    pub accuracy: f64,
    pub macro_f1: f64,
}

fn class_f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Accuracy and the mean of the yes-class and no-class F1.
///
/// A class that appears in neither list contributes an F1 of 0.
pub fn binary_metrics(preds: &[bool], gts: &[bool]) -> Result<BinaryScores, EvalError> {
    if preds.len() != gts.len() {
        return Err(EvalError::Length(format!(
            "{} predictions for {} labels",
            preds.len(),
            gts.len()
        )));
    }
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut m = [[0usize; 2]; 2];
    for (&p, &g) in preds.iter().zip(gts) {
        m[p as usize][g as usize] += 1;
    }
    let correct = m[0][0] + m[1][1];
    let f1_yes = class_f1(m[1][1], m[1][0], m[0][1]);
    let f1_no = class_f1(m[0][0], m[0][1], m[1][0]);
    Ok(BinaryScores {
        accuracy: correct as f64 / preds.len() as f64,
        macro_f1: (f1_yes + f1_no) / 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rect(w: u32, h: u32, x0: u32, y0: u32, x1: u32, y1: u32) -> BinaryPixelMap {
        BinaryPixelMap::from_fn(w, h, |x, y| x >= x0 && x < x1 && y >= y0 && y < y1)
    }

    #[test]
    fn localization_examples() {
        let a = rect(4, 4, 0, 0, 2, 2);
        let s = localization_metrics(&a, &a).unwrap();
        assert_eq!((s.iou, s.f1), (1.0, 1.0));
        let b = rect(4, 4, 2, 2, 4, 4);
        let s = localization_metrics(&a, &b).unwrap();
        assert_eq!((s.iou, s.f1), (0.0, 0.0));
        let c = rect(4, 4, 1, 1, 3, 3);
        let s = localization_metrics(&a, &c).unwrap();
        assert!((s.iou - 1.0 / 7.0).abs() < 1e-12);
        assert!((s.f1 - 0.25).abs() < 1e-12);
        let e = BinaryPixelMap::new(4, 4);
        let s = localization_metrics(&e, &e).unwrap();
        assert_eq!((s.iou, s.f1), (1.0, 1.0));
        assert!(localization_metrics(&e, &BinaryPixelMap::new(3, 4)).is_err());
    }

    #[test]
    fn binary_examples() {
        let gts = [true, false, true, false];
        let s = binary_metrics(&gts, &gts).unwrap();
        assert_eq!((s.accuracy, s.macro_f1), (1.0, 1.0));
        let s = binary_metrics(&[true; 4], &gts).unwrap();
        assert_eq!(s.accuracy, 0.5);
        assert!((s.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(binary_metrics(&[], &[]), Err(EvalError::Empty)));
        assert!(binary_metrics(&[true], &[true, false]).is_err());
        // Only one class present: the other contributes 0.
        let s = binary_metrics(&[true, true], &[true, true]).unwrap();
        assert_eq!((s.accuracy, s.macro_f1), (1.0, 0.5));
    }

    proptest! {
        #[test]
        fn f1_iou_identity(a in prop::collection::vec(any::<bool>(), 64), b in prop::collection::vec(any::<bool>(), 64)) {
            let pa = BinaryPixelMap::from_fn(8, 8, |x, y| a[(y * 8 + x) as usize]);
            let pb = BinaryPixelMap::from_fn(8, 8, |x, y| b[(y * 8 + x) as usize]);
            let s = localization_metrics(&pa, &pb).unwrap();
            prop_assert!((s.f1 - 2.0 * s.iou / (1.0 + s.iou)).abs() < 1e-15);
        }

        #[test]
        fn perfect_binary_iff_equal(p in prop::collection::vec(any::<bool>(), 1..20), g in prop::collection::vec(any::<bool>(), 1..20)) {
            let n = p.len().min(g.len());
            let (p, g) = (&p[..n], &g[..n]);
            let s = binary_metrics(p, g).unwrap();
            let both = g.contains(&true) && g.contains(&false);
            prop_assert_eq!(s.accuracy == 1.0 && s.macro_f1 == 1.0, p == g && both);
        }
    }
}
