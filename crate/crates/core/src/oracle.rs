//! Brute-force reference computations. They share no code path with the
//! closed forms and the evaluator they check.

use alloc::vec::Vec;

use crate::attentive::BBox;
use crate::error::{Error, Result};
use crate::geometry::EncounterState;
use crate::simkit::{EvalSummary, FrameRecord};

/// Marches the gripper along the relative velocity in steps of `step` meters
/// and returns the last position before the spheres touch. `None` when the
/// straight line never reaches contact.
pub fn sweep_safe_distance(e: &EncounterState, step: f64) -> Option<f64> {
    let s = e.margins.sum();
    let (r, ca) = (e.r, libm::cos(e.alpha));
    let touching = |d: f64| r * r - 2.0 * d * r * ca + d * d <= s * s;
    if touching(0.0) {
        return Some(0.0);
    }
    let limit = r + s;
    let mut k = 1u64;
    loop {
        let d = k as f64 * step;
        if d > limit {
            return None;
        }
        if touching(d) {
            return Some((k - 1) as f64 * step);
        }
        k += 1;
    }
}

/// IoU of two axis-aligned boxes from their corner coordinates.
pub fn rect_iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let [ax0, ay0, ax1, ay1] = a;
    let [bx0, by0, bx1, by1] = b;
    let ix = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let iy = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = ix * iy;
    let union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter;
    inter / union
}

/// IoU of two squares of side `side` offset by `b` on both axes.
pub fn shifted_square_iou(b: f64, side: f64) -> f64 {
    rect_iou([0.0, 0.0, side, side], [b, b, b + side, b + side])
}

fn corners(b: &BBox) -> [f64; 4] {
    [b.x, b.y, b.x + b.w, b.y + b.h]
}

/// Exhaustive reference for [`crate::simkit::evaluate`].
///
/// Every precision/recall point is recomputed from scratch for each ranking
/// prefix, and each interpolated precision is the maximum over all prefixes.
pub fn reference_evaluate(frames: &[FrameRecord], gt: &[BBox], thresholds: &[f64]) -> Result<EvalSummary> {
    if frames.len() != gt.len() {
        return Err(Error::LengthMismatch {
            expected: gt.len(),
            found: frames.len(),
        });
    }
    let n = frames.len();
    if n == 0 {
        return Ok(EvalSummary {
            frames: 0,
            inference_ms: 0.0,
            overhead_ms: 0.0,
            total_ms: 0.0,
            ar: 0.0,
            mean_iou: 0.0,
            ap50: 0.0,
            ap75: 0.0,
        });
    }
    // (confidence, frame, position in frame, iou)
    let mut dets: Vec<(f64, usize, usize, f64)> = Vec::new();
    for (f, rec) in frames.iter().enumerate() {
        for (k, d) in rec.detections.iter().enumerate() {
            dets.push((d.confidence, f, k, rect_iou(corners(&d.bbox), corners(&gt[f]))));
        }
    }
    // Selection order: highest confidence first, then frame, then position.
    let mut order: Vec<usize> = Vec::new();
    let mut used = alloc::vec![false; dets.len()];
    for _ in 0..dets.len() {
        let mut pick: Option<usize> = None;
        for (i, d) in dets.iter().enumerate() {
            if used[i] {
                continue;
            }
            pick = match pick {
                None => Some(i),
                Some(j) => {
                    let p = &dets[j];
                    if d.0 > p.0 || (d.0 == p.0 && (d.1, d.2) < (p.1, p.2)) {
                        Some(i)
                    } else {
                        Some(j)
                    }
                }
            };
        }
        let i = pick.expect("unused detection remains");
        used[i] = true;
        order.push(i);
    }

    let ap = |t: f64| -> f64 {
        let prefix_point = |len: usize| -> (f64, f64) {
            let mut taken = alloc::vec![false; n];
            let mut tp = 0usize;
            for &i in &order[..len] {
                let (_, f, _, iou) = dets[i];
                if !taken[f] && iou >= t {
                    taken[f] = true;
                    tp += 1;
                }
            }
            (tp as f64 / n as f64, tp as f64 / len as f64)
        };
        let points: Vec<(f64, f64)> = (1..=order.len()).map(prefix_point).collect();
        let mut sum = 0.0;
        for k in 0..=100 {
            let r = k as f64 / 100.0;
            let best = points
                .iter()
                .filter(|(rec, _)| *rec >= r)
                .map(|p| p.1)
                .fold(0.0, f64::max);
            sum += best;
        }
        sum / 101.0
    };

    let mut ar = 0.0;
    if !thresholds.is_empty() {
        let mut sum = 0.0;
        for &t in thresholds {
            let mut hits = 0usize;
            for f in 0..n {
                if dets.iter().any(|d| d.1 == f && d.3 >= t) {
                    hits += 1;
                }
            }
            sum += hits as f64 / n as f64;
        }
        ar = sum / thresholds.len() as f64;
    }

    let (mut iou_sum, mut detected) = (0.0, 0usize);
    for f in 0..n {
        if let Some(&i) = order.iter().find(|&&i| dets[i].1 == f) {
            iou_sum += dets[i].3;
            detected += 1;
        }
    }
    let inference_ms = frames.iter().map(|f| f.inference).sum::<f64>() / n as f64 * 1000.0;
    let overhead_ms = frames.iter().map(|f| f.overhead).sum::<f64>() / n as f64 * 1000.0;
    Ok(EvalSummary {
        frames: n,
        inference_ms,
        overhead_ms,
        total_ms: inference_ms + overhead_ms,
        ar: 100.0 * ar,
        mean_iou: if detected > 0 { iou_sum / detected as f64 } else { 0.0 },
        ap50: 100.0 * ap(0.5),
        ap75: 100.0 * ap(0.75),
    })
}
