//! Synthetic scenarios, a statistically parameterised detector ensemble,
//! baseline / attentive pipeline runners and a COCO-style evaluator.

use alloc::vec::Vec;
use core::convert::Infallible;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::attentive::{
    full_frame_step, AttentiveConfig, AttentiveState, BBox, Detection, Detector, DetectorOutput, EnsembleSpec,
    FrameMeta, Pass, Region, StepOutput,
};
use crate::collision::PerceptionProfile;
use crate::error::{Error, Result};
use crate::geometry::overlap_side_fraction;

/// Ground-truth motion model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrackKind {
    /// Fixed per-frame velocity, as a fraction of the box's shorter side.
    /// Reflects off the frame edges.
    ConstantVelocity { vx: f64, vy: f64 },
    /// Lissajous-style sway with the given period in frames, scaled so the
    /// per-frame displacement stays within the step bound.
    Sinusoidal { period: f64 },
    /// Independent uniform steps per axis within the step bound.
    RandomWalk,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioSpec {
    pub kind: TrackKind,
    pub width: u32,
    pub height: u32,
    pub length: usize,
    /// Box area over frame area, sampled uniformly from this range.
    pub area_ratio: (f64, f64),
    /// Box width over height, sampled uniformly from this range.
    pub aspect: (f64, f64),
    /// Per-axis displacement bound per frame, as a fraction of the box's shorter side.
    pub max_step: f64,
    pub fps: f64,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            kind: TrackKind::RandomWalk,
            width: 1280,
            height: 720,
            length: 300,
            area_ratio: (0.02, 0.1),
            aspect: (1.0, 1.0),
            max_step: 0.1,
            fps: 30.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub frames: Vec<FrameMeta>,
    pub gt_track: Vec<BBox>,
    pub seed: u64,
}

impl Scenario {
    pub fn new(frames: Vec<FrameMeta>, gt_track: Vec<BBox>, seed: u64) -> Result<Self> {
        if frames.len() != gt_track.len() {
            return Err(Error::LengthMismatch {
                expected: frames.len(),
                found: gt_track.len(),
            });
        }
        for (f, b) in frames.iter().zip(&gt_track) {
            if !f.bounds().contains(b) {
                return Err(Error::Infeasible("ground-truth box outside frame"));
            }
        }
        if frames.windows(2).any(|w| w[0].index >= w[1].index) {
            return Err(Error::InvalidParam("frame indices must increase"));
        }
        Ok(Self { frames, gt_track, seed })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

fn reflect(v: f64, lo: f64, hi: f64) -> f64 {
    let v = if v < lo { 2.0 * lo - v } else { v };
    let v = if v > hi { 2.0 * hi - v } else { v };
    v.clamp(lo, hi)
}

fn uniform_in<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Generates a single-object track that stays inside the frame.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    if spec.length == 0 {
        return Err(Error::Infeasible("scenario needs at least one frame"));
    }
    if spec.width == 0 || spec.height == 0 {
        return Err(Error::Infeasible("frame dimensions must be positive"));
    }
    let (r_lo, r_hi) = spec.area_ratio;
    if !(r_lo > 0.0 && r_lo <= r_hi && r_hi <= 1.0) {
        return Err(Error::Infeasible("area ratio range must lie in (0, 1]"));
    }
    let (a_lo, a_hi) = spec.aspect;
    if !(a_lo > 0.0 && a_lo <= a_hi && a_hi.is_finite()) {
        return Err(Error::Infeasible("aspect range must be positive and ordered"));
    }
    if !(spec.max_step.is_finite() && spec.max_step >= 0.0) {
        return Err(Error::Infeasible("step bound must be non-negative"));
    }
    if !(spec.fps.is_finite() && spec.fps > 0.0) {
        return Err(Error::Infeasible("fps must be positive"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (fw, fh) = (spec.width as f64, spec.height as f64);
    let area = uniform_in(&mut rng, spec.area_ratio) * fw * fh;
    let aspect = uniform_in(&mut rng, spec.aspect);
    let w = libm::sqrt(area * aspect);
    let h = area / w;
    if w > fw || h > fh {
        return Err(Error::Infeasible("box does not fit inside the frame"));
    }
    let (x_lo, x_hi) = (w / 2.0, fw - w / 2.0);
    let (y_lo, y_hi) = (h / 2.0, fh - h / 2.0);
    let bound = spec.max_step * w.min(h);
    let mut cx = uniform_in(&mut rng, (x_lo, x_hi));
    let mut cy = uniform_in(&mut rng, (y_lo, y_hi));

    let (mut vx, mut vy) = match spec.kind {
        TrackKind::ConstantVelocity { vx, vy } => {
            if vx.abs() > spec.max_step || vy.abs() > spec.max_step {
                return Err(Error::Infeasible("velocity exceeds the step bound"));
            }
            (vx * w.min(h), vy * w.min(h))
        }
        _ => (0.0, 0.0),
    };
    let (ox, oy) = (cx, cy);
    let amp = match spec.kind {
        TrackKind::Sinusoidal { period } => {
            if !(period.is_finite() && period > 0.0) {
                return Err(Error::Infeasible("period must be positive"));
            }
            bound * period / (2.0 * PI)
        }
        _ => 0.0,
    };

    let mut frames = Vec::with_capacity(spec.length);
    let mut gt = Vec::with_capacity(spec.length);
    for t in 0..spec.length {
        if let TrackKind::Sinusoidal { period } = spec.kind {
            let phase = 2.0 * PI * t as f64 / period;
            cx = (ox + amp * libm::sin(phase)).clamp(x_lo, x_hi);
            cy = (oy + 0.5 * amp * libm::cos(phase)).clamp(y_lo, y_hi);
        } else if t > 0 {
            match spec.kind {
                TrackKind::ConstantVelocity { .. } => {
                    let (nx, ny) = (cx + vx, cy + vy);
                    if nx < x_lo || nx > x_hi {
                        vx = -vx;
                    }
                    if ny < y_lo || ny > y_hi {
                        vy = -vy;
                    }
                    cx = reflect(nx, x_lo, x_hi);
                    cy = reflect(ny, y_lo, y_hi);
                }
                TrackKind::Sinusoidal { .. } => unreachable!(),
                TrackKind::RandomWalk => {
                    let dx = uniform_in(&mut rng, (-bound, bound));
                    let dy = uniform_in(&mut rng, (-bound, bound));
                    cx = reflect(cx + dx, x_lo, x_hi);
                    cy = reflect(cy + dy, y_lo, y_hi);
                }
            }
        }
        frames.push(FrameMeta {
            width: spec.width,
            height: spec.height,
            index: t as u64,
            timestamp: t as f64 / spec.fps,
        });
        gt.push(BBox {
            x: cx - w / 2.0,
            y: cy - h / 2.0,
            w,
            h,
        });
    }
    Ok(Scenario {
        frames,
        gt_track: gt,
        seed: spec.seed,
    })
}

/// Statistical stand-in for an ensemble of detectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDetectorSpec {
    /// Per-size latencies and accuracy offsets.
    pub ensemble: EnsembleSpec,
    /// Recall of the full-size model.
    pub recall: f64,
    /// Mean target IoU of the full-size model.
    pub iou_mean: f64,
    pub iou_spread: f64,
    /// Standard deviation of per-pass latency, seconds.
    pub latency_jitter: f64,
    /// Standard deviation of the confidence around the achieved IoU.
    pub confidence_noise: f64,
    pub confidence_threshold: f64,
    /// Per-frame cost outside inference, seconds.
    pub overhead: f64,
}

impl SyntheticDetectorSpec {
    /// Full-size numbers of the E6-class model with a quadratic ensemble
    /// over 320/640/960/1280.
    pub fn e6_like() -> Self {
        Self {
            ensemble: EnsembleSpec::quadratic(&[320, 640, 960, 1280], 0.034764, 0.005, 0.005)
                .expect("valid default ensemble"),
            recall: 0.9,
            iou_mean: 0.75,
            iou_spread: 0.05,
            latency_jitter: 0.0005,
            confidence_noise: 0.05,
            confidence_threshold: 0.1,
            overhead: 0.005834,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("recall", self.recall),
            ("iou_mean", self.iou_mean),
            ("confidence_threshold", self.confidence_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange { what, value: v });
            }
        }
        for (what, v) in [
            ("iou_spread", self.iou_spread),
            ("latency_jitter", self.latency_jitter),
            ("confidence_noise", self.confidence_noise),
            ("overhead", self.overhead),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::OutOfRange { what, value: v });
            }
        }
        if !self.ensemble.is_latency_monotone() {
            return Err(Error::InvalidParam("ensemble latency must not decrease with size"));
        }
        Ok(())
    }

    pub fn recall_at(&self, size: u32) -> f64 {
        let delta = self.ensemble.profile(size).map_or(0.0, |m| m.recall_delta);
        (self.recall + delta).clamp(0.0, 1.0)
    }

    pub fn iou_at(&self, size: u32) -> f64 {
        let delta = self.ensemble.profile(size).map_or(0.0, |m| m.iou_delta);
        (self.iou_mean + delta).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSample {
    pub detection: Option<Detection>,
    /// IoU of the emitted box with `gt`, before the confidence cut.
    pub achieved_iou: Option<f64>,
    pub latency: f64,
}

/// One synthetic detector pass on a (visible) ground-truth box.
///
/// With probability `recall_at(size)` a box is emitted, shifted from `gt` on
/// both axes by the offset that realises a sampled target IoU, with random
/// signs. Every call consumes the same number of random draws.
pub fn synthetic_detect<R: Rng>(
    gt: Option<&BBox>,
    size: u32,
    spec: &SyntheticDetectorSpec,
    rng: &mut R,
) -> SyntheticSample {
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mean_latency = spec.ensemble.latency(size);
    let latency = (mean_latency + spec.latency_jitter * unit.sample(rng)).max(mean_latency * 0.05);
    let hit = rng.random::<f64>() < spec.recall_at(size);
    let target = (spec.iou_at(size) + spec.iou_spread * unit.sample(rng)).clamp(0.0, 1.0);
    let sx = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let sy = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let conf_noise = spec.confidence_noise * unit.sample(rng);

    let Some(gt) = gt.filter(|_| hit) else {
        return SyntheticSample {
            detection: None,
            achieved_iou: None,
            latency,
        };
    };
    let keep = overlap_side_fraction(target);
    let bbox = BBox {
        x: gt.x + sx * gt.w * (1.0 - keep),
        y: gt.y + sy * gt.h * (1.0 - keep),
        w: gt.w,
        h: gt.h,
    };
    let achieved = gt.iou(&bbox);
    let confidence = (achieved + conf_noise).clamp(0.0, 1.0);
    SyntheticSample {
        detection: (confidence >= spec.confidence_threshold).then_some(Detection { bbox, confidence }),
        achieved_iou: Some(achieved),
        latency,
    }
}

/// [`Detector`] backed by [`synthetic_detect`]. It sees only the part of the
/// ground truth that falls inside the pass's crop.
pub struct SyntheticDetector<'a> {
    spec: &'a SyntheticDetectorSpec,
    rng: ChaCha8Rng,
    gt: Option<BBox>,
}

impl<'a> SyntheticDetector<'a> {
    pub fn new(spec: &'a SyntheticDetectorSpec, seed: u64) -> Self {
        Self {
            spec,
            rng: ChaCha8Rng::seed_from_u64(seed),
            gt: None,
        }
    }

    pub fn set_ground_truth(&mut self, gt: Option<BBox>) {
        self.gt = gt;
    }
}

impl Detector for SyntheticDetector<'_> {
    type Error = Infallible;

    fn detect(&mut self, _frame: &FrameMeta, pass: &Pass) -> core::result::Result<DetectorOutput, Infallible> {
        let t = pass.selection.transform;
        let visible = self.gt.and_then(|g| g.intersection(&pass.crop)).map(|v| t.forward(&v));
        let sample = synthetic_detect(visible.as_ref(), pass.selection.size, self.spec, &mut self.rng);
        Ok(DetectorOutput {
            detections: sample.detection.into_iter().collect(),
            latency: sample.latency,
        })
    }
}

/// What happened on one frame of a pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub index: u64,
    /// Processed crop; `None` when the whole frame was processed.
    pub region: Option<BBox>,
    pub model_sizes: Vec<u32>,
    /// Inference time, seconds.
    pub inference: f64,
    /// Overhead time, seconds.
    pub overhead: f64,
    /// Detections in frame coordinates.
    pub detections: Vec<Detection>,
}

impl FrameRecord {
    fn from_step(index: u64, out: StepOutput) -> Self {
        Self {
            index,
            region: match out.region {
                Region::FullFrame => None,
                Region::Crop(b) => Some(b),
            },
            model_sizes: out.passes.iter().map(|p| p.selection.size).collect(),
            inference: out.inference,
            overhead: out.overhead,
            detections: out.detections.into_iter().map(|d| d.detection).collect(),
        }
    }

    /// Highest-confidence detection; earliest wins ties.
    pub fn best(&self) -> Option<&Detection> {
        self.detections
            .iter()
            .fold(None, |best: Option<&Detection>, d| match best {
                Some(b) if b.confidence >= d.confidence => Some(b),
                _ => Some(d),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub frames: Vec<FrameRecord>,
    pub summary: EvalSummary,
}

/// Every frame processed whole with the default model.
pub fn run_baseline(s: &Scenario, spec: &SyntheticDetectorSpec, seed: u64) -> Result<RunOutput> {
    spec.validate()?;
    let mut det = SyntheticDetector::new(spec, seed);
    let mut frames = Vec::with_capacity(s.len());
    for (frame, gt) in s.frames.iter().zip(&s.gt_track) {
        det.set_ground_truth(Some(*gt));
        let out = match full_frame_step(frame, &spec.ensemble, spec.overhead, &mut det) {
            Ok(out) => out,
            Err(never) => match never {},
        };
        frames.push(FrameRecord::from_step(frame.index, out));
    }
    let summary = evaluate(&frames, &s.gt_track, &coco_thresholds())?;
    Ok(RunOutput { frames, summary })
}

/// Frames processed by the attentive state machine.
pub fn run_attentive(
    s: &Scenario,
    spec: &SyntheticDetectorSpec,
    config: &AttentiveConfig,
    seed: u64,
) -> Result<RunOutput> {
    spec.validate()?;
    let mut state = AttentiveState::new(AttentiveConfig {
        overhead: spec.overhead,
        ..*config
    })?;
    let mut det = SyntheticDetector::new(spec, seed);
    let mut frames = Vec::with_capacity(s.len());
    for (frame, gt) in s.frames.iter().zip(&s.gt_track) {
        det.set_ground_truth(Some(*gt));
        let out = match state.step(frame, &spec.ensemble, &mut det) {
            Ok(out) => out,
            Err(never) => match never {},
        };
        frames.push(FrameRecord::from_step(frame.index, out));
    }
    let summary = evaluate(&frames, &s.gt_track, &coco_thresholds())?;
    Ok(RunOutput { frames, summary })
}

/// Aggregate perception metrics of a run. Times in milliseconds, AR and AP in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSummary {
    pub frames: usize,
    pub inference_ms: f64,
    pub overhead_ms: f64,
    pub total_ms: f64,
    pub ar: f64,
    pub mean_iou: f64,
    pub ap50: f64,
    pub ap75: f64,
}

impl EvalSummary {
    /// Summary from published numbers; overhead is derived so the totals add up.
    pub fn from_reported(inference_ms: f64, total_ms: f64, ar: f64, mean_iou: f64) -> Self {
        Self {
            frames: 0,
            inference_ms,
            overhead_ms: total_ms - inference_ms,
            total_ms,
            ar,
            mean_iou,
            ap50: 0.0,
            ap75: 0.0,
        }
    }
}

/// IoU thresholds 0.50, 0.55, …, 0.95.
pub fn coco_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

/// 101-point interpolated average precision at one IoU threshold, with at
/// most one true positive per frame (one ground-truth object per frame).
fn average_precision(frames: &[FrameRecord], gt: &[BBox], threshold: f64) -> f64 {
    let n_gt = frames.len();
    if n_gt == 0 {
        return 0.0;
    }
    let mut ranked: Vec<(f64, usize, f64)> = frames
        .iter()
        .enumerate()
        .flat_map(|(f, rec)| rec.detections.iter().map(move |d| (d.confidence, f, d.bbox.iou(&gt[f]))))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut matched = alloc::vec![false; n_gt];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut recall = Vec::with_capacity(ranked.len());
    let mut precision = Vec::with_capacity(ranked.len());
    for &(_, f, iou) in &ranked {
        if !matched[f] && iou >= threshold {
            matched[f] = true;
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / n_gt as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let mut sum = 0.0;
    for k in 0..=100 {
        let r = k as f64 / 100.0;
        let idx = recall.partition_point(|&x| x < r);
        sum += precision.get(idx).copied().unwrap_or(0.0);
    }
    sum / 101.0
}

/// COCO-protocol metrics for a single-object-per-frame run.
///
/// AR averages, over `thresholds`, the fraction of frames with a detection
/// at or above the threshold. AP@0.5 and AP@0.75 rank all detections by
/// confidence. Mean IoU is taken over frames that produced a detection,
/// using the most confident one.
pub fn evaluate(frames: &[FrameRecord], gt: &[BBox], thresholds: &[f64]) -> Result<EvalSummary> {
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
    let ar = if thresholds.is_empty() {
        0.0
    } else {
        let mut sum = 0.0;
        for &t in thresholds {
            let hits = frames
                .iter()
                .zip(gt)
                .filter(|(rec, g)| rec.detections.iter().any(|d| d.bbox.iou(g) >= t))
                .count();
            sum += hits as f64 / n as f64;
        }
        sum / thresholds.len() as f64
    };
    let (mut iou_sum, mut detected) = (0.0, 0usize);
    for (rec, g) in frames.iter().zip(gt) {
        if let Some(best) = rec.best() {
            iou_sum += best.bbox.iou(g);
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
        ap50: 100.0 * average_precision(frames, gt, 0.5),
        ap75: 100.0 * average_precision(frames, gt, 0.75),
    })
}

/// Which timing column feeds the per-frame perception latency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TpMode {
    /// Inference plus overhead: a new frame cannot start before both finish.
    #[default]
    Total,
    Inference,
}

pub fn to_profile(e: &EvalSummary, t_r: f64, mode: TpMode) -> Result<PerceptionProfile> {
    let t_p_ms = match mode {
        TpMode::Total => e.total_ms,
        TpMode::Inference => e.inference_ms,
    };
    PerceptionProfile::new(t_p_ms / 1000.0, t_r, e.ar / 100.0, e.mean_iou)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(dets: &[(BBox, f64)]) -> FrameRecord {
        FrameRecord {
            index: 0,
            region: None,
            model_sizes: alloc::vec![1280],
            inference: 0.03,
            overhead: 0.005,
            detections: dets.iter().map(|&(bbox, confidence)| Detection { bbox, confidence }).collect(),
        }
    }

    fn b(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn scenario_zero_velocity_is_static() {
        let s = generate_scenario(&ScenarioSpec {
            kind: TrackKind::ConstantVelocity { vx: 0.0, vy: 0.0 },
            length: 20,
            ..Default::default()
        })
        .unwrap();
        assert!(s.gt_track.iter().all(|g| *g == s.gt_track[0]));
    }

    #[test]
    fn scenario_is_deterministic_and_in_bounds() {
        for kind in [
            TrackKind::RandomWalk,
            TrackKind::Sinusoidal { period: 90.0 },
            TrackKind::ConstantVelocity { vx: 0.1, vy: -0.05 },
        ] {
            let spec = ScenarioSpec { kind, seed: 17, length: 400, ..Default::default() };
            let a = generate_scenario(&spec).unwrap();
            assert_eq!(a, generate_scenario(&spec).unwrap());
            let bounds = a.frames[0].bounds();
            assert!(a.gt_track.iter().all(|g| bounds.contains(g)));
            let side = a.gt_track[0].w.min(a.gt_track[0].h);
            for w in a.gt_track.windows(2) {
                let (c0, c1) = (w[0].center(), w[1].center());
                assert!((c1.0 - c0.0).abs() <= spec.max_step * side + 1e-9);
                assert!((c1.1 - c0.1).abs() <= spec.max_step * side + 1e-9);
            }
        }
    }

    #[test]
    fn scenario_area_ratio() {
        let s = generate_scenario(&ScenarioSpec { area_ratio: (0.1, 0.1), ..Default::default() }).unwrap();
        let ratio = s.gt_track[0].area() / (1280.0 * 720.0);
        assert!((ratio - 0.1).abs() <= 0.01);
    }

    #[test]
    fn scenario_rejects_infeasible() {
        assert!(generate_scenario(&ScenarioSpec { length: 0, ..Default::default() }).is_err());
        assert!(generate_scenario(&ScenarioSpec { area_ratio: (0.9, 0.9), aspect: (4.0, 4.0), ..Default::default() }).is_err());
        assert!(generate_scenario(&ScenarioSpec {
            kind: TrackKind::ConstantVelocity { vx: 0.5, vy: 0.0 },
            max_step: 0.1,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn synthetic_detect_exact_when_noiseless() {
        let mut spec = SyntheticDetectorSpec::e6_like();
        spec.recall = 1.0;
        spec.iou_mean = 1.0;
        spec.iou_spread = 0.0;
        spec.latency_jitter = 0.0;
        spec.confidence_noise = 0.0;
        let gt = b(100.0, 80.0, 60.0, 40.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = synthetic_detect(Some(&gt), 1280, &spec, &mut rng);
        assert_eq!(s.detection.unwrap().bbox, gt);
        assert_eq!(s.latency, spec.ensemble.latency(1280));
    }

    #[test]
    fn synthetic_detect_never_fires_with_zero_recall() {
        let mut spec = SyntheticDetectorSpec::e6_like();
        spec.recall = 0.0;
        let gt = b(0.0, 0.0, 50.0, 50.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!((0..1000).all(|_| synthetic_detect(Some(&gt), 1280, &spec, &mut rng).detection.is_none()));
    }

    #[test]
    fn synthetic_detect_statistics() {
        let spec = SyntheticDetectorSpec::e6_like();
        let gt = b(200.0, 100.0, 120.0, 90.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let (mut hits, mut iou_sum, mut achieved_n) = (0usize, 0.0, 0usize);
        for _ in 0..n {
            let s = synthetic_detect(Some(&gt), 1280, &spec, &mut rng);
            if s.detection.is_some() {
                hits += 1;
            }
            if let Some(a) = s.achieved_iou {
                iou_sum += a;
                achieved_n += 1;
            }
        }
        let p = 0.9;
        let sigma = libm::sqrt(p * (1.0 - p) / n as f64);
        assert!((hits as f64 / n as f64 - p).abs() <= 3.0 * sigma);
        assert!((iou_sum / achieved_n as f64 - 0.75).abs() <= 0.005);
    }

    #[test]
    fn evaluator_worked_example() {
        let gt = [b(0.0, 0.0, 10.0, 10.0), b(0.0, 0.0, 10.0, 10.0)];
        let frames = [rec(&[(b(0.0, 0.0, 8.0, 10.0), 0.9)]), rec(&[(b(0.0, 0.0, 6.0, 10.0), 0.8)])];
        assert_eq!(gt[0].iou(&frames[0].detections[0].bbox), 0.8);
        let s = evaluate(&frames, &gt, &coco_thresholds()).unwrap();
        assert_eq!(s.ap50, 100.0);
        assert!((s.ap75 - 100.0 * 51.0 / 101.0).abs() < 1e-12);
        assert!((s.ar - 50.0).abs() < 1e-12);
        assert!((s.mean_iou - 0.7).abs() < 1e-12);
        assert_eq!(s.total_ms, s.inference_ms + s.overhead_ms);
    }

    #[test]
    fn evaluator_perfect_and_empty() {
        let gt = [b(5.0, 5.0, 10.0, 10.0), b(6.0, 5.0, 10.0, 10.0)];
        let perfect = [rec(&[(gt[0], 0.9)]), rec(&[(gt[1], 0.7)])];
        let s = evaluate(&perfect, &gt, &coco_thresholds()).unwrap();
        assert_eq!((s.ar, s.ap50, s.ap75, s.mean_iou), (100.0, 100.0, 100.0, 1.0));
        let empty = [rec(&[]), rec(&[])];
        let s = evaluate(&empty, &gt, &coco_thresholds()).unwrap();
        assert_eq!((s.ar, s.ap50, s.ap75, s.mean_iou), (0.0, 0.0, 0.0, 0.0));
        assert!(evaluate(&empty[..1], &gt, &coco_thresholds()).is_err());
    }

    #[test]
    fn to_profile_table_values() {
        let base = EvalSummary::from_reported(34.764, 40.599, 89.869, 0.750);
        let p = to_profile(&base, 0.1, TpMode::Total).unwrap();
        assert!((p.t_p - 0.040599).abs() < 1e-15);
        assert!((p.recall - 0.89869).abs() < 1e-15);
        assert_eq!(p.iou, 0.750);
        let ours = EvalSummary::from_reported(25.036, 30.882, 88.670, 0.738);
        let p = to_profile(&ours, 0.1, TpMode::Total).unwrap();
        assert!((p.t_p - 0.030882).abs() < 1e-15);
        assert!((p.recall - 0.88670).abs() < 1e-15);
        let p = to_profile(&ours, 0.1, TpMode::Inference).unwrap();
        assert!((p.t_p - 0.025036).abs() < 1e-15);
    }

    #[test]
    fn runs_are_deterministic() {
        let s = generate_scenario(&ScenarioSpec { length: 50, seed: 4, ..Default::default() }).unwrap();
        let spec = SyntheticDetectorSpec::e6_like();
        let a = run_attentive(&s, &spec, &AttentiveConfig::default(), 9).unwrap();
        assert_eq!(a, run_attentive(&s, &spec, &AttentiveConfig::default(), 9).unwrap());
        let base = run_baseline(&s, &spec, 9).unwrap();
        assert!(base.frames.iter().all(|f| f.model_sizes == [1280]));
        assert!((base.summary.inference_ms - 34.764).abs() < 0.5);
    }

    #[test]
    fn small_boxes_run_faster_attentively() {
        let s = generate_scenario(&ScenarioSpec { area_ratio: (0.01, 0.05), length: 200, seed: 5, ..Default::default() }).unwrap();
        let spec = SyntheticDetectorSpec::e6_like();
        let base = run_baseline(&s, &spec, 1).unwrap();
        let ours = run_attentive(&s, &spec, &AttentiveConfig::default(), 1).unwrap();
        assert!(ours.summary.inference_ms < base.summary.inference_ms);
    }

    #[test]
    fn single_frame_run_degrades_gracefully() {
        let s = generate_scenario(&ScenarioSpec { length: 1, ..Default::default() }).unwrap();
        let spec = SyntheticDetectorSpec::e6_like();
        let out = run_attentive(&s, &spec, &AttentiveConfig::default(), 1).unwrap();
        assert_eq!(out.summary.frames, 1);
        assert_eq!(out.frames[0].region, None);
    }
}
