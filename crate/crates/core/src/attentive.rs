//! Attentive processing: crop the frame to where the target is expected,
//! run the smallest ensemble member that fits the crop, and map the results
//! back to frame coordinates.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Axis-aligned box in pixels, top-left anchored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::InvalidParam("box origin must be finite"));
        }
        if !(w.is_finite() && w > 0.0 && h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParam("box sides must be positive"));
        }
        Ok(Self { x, y, w, h })
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn max_side(&self) -> f64 {
        self.w.max(self.h)
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x1 > x0 && y1 > y0).then_some(BBox { x: x0, y: y0, w: x1 - x0, h: y1 - y0 })
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection(other).map_or(0.0, |b| b.area());
        let union = self.area() + other.area() - inter;
        if union > 0.0 {
            inter / union
        } else {
            0.0
        }
    }

    /// Smallest box covering both.
    pub fn union_bounds(&self, other: &BBox) -> BBox {
        let x0 = self.x.min(other.x);
        let y0 = self.y.min(other.y);
        BBox {
            x: x0,
            y: y0,
            w: self.right().max(other.right()) - x0,
            h: self.bottom().max(other.bottom()) - y0,
        }
    }

    pub fn contains(&self, other: &BBox) -> bool {
        other.x >= self.x && other.y >= self.y && other.right() <= self.right() && other.bottom() <= self.bottom()
    }

    pub fn contains_point(&self, px: f64, py: f64) -> bool {
        px >= self.x && px <= self.right() && py >= self.y && py <= self.bottom()
    }
}

/// Metadata of one input frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMeta {
    pub width: u32,
    pub height: u32,
    pub index: u64,
    pub timestamp: f64,
}

impl FrameMeta {
    pub fn bounds(&self) -> BBox {
        BBox {
            x: 0.0,
            y: 0.0,
            w: self.width as f64,
            h: self.height as f64,
        }
    }
}

/// Maps frame coordinates into a model input: `model = (global - origin) * scale`.
///
/// Crops are letterboxed into the square model input anchored at the top-left
/// corner, so the padding never shifts the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropTransform {
    pub origin_x: f64,
    pub origin_y: f64,
    pub scale: f64,
}

impl CropTransform {
    pub fn forward(&self, b: &BBox) -> BBox {
        BBox {
            x: (b.x - self.origin_x) * self.scale,
            y: (b.y - self.origin_y) * self.scale,
            w: b.w * self.scale,
            h: b.h * self.scale,
        }
    }

    pub fn map_back(&self, det: &BBox) -> BBox {
        map_back(det, self)
    }
}

/// Maps a detection in model coordinates back to frame coordinates.
pub fn map_back(det: &BBox, t: &CropTransform) -> BBox {
    BBox {
        x: det.x / t.scale + t.origin_x,
        y: det.y / t.scale + t.origin_y,
        w: det.w / t.scale,
        h: det.h / t.scale,
    }
}

/// One ensemble member: a square input size and its characteristics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeProfile {
    pub size: u32,
    /// Mean inference latency, seconds.
    pub latency: f64,
    /// Recall offset relative to the full-size model.
    pub recall_delta: f64,
    /// IoU offset relative to the full-size model.
    pub iou_delta: f64,
}

/// The ensemble of input sizes, ascending; the last entry is the full-resolution default model.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    members: Vec<SizeProfile>,
}

impl EnsembleSpec {
    pub fn new(members: Vec<SizeProfile>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidParam("ensemble must not be empty"));
        }
        if members.windows(2).any(|w| w[0].size >= w[1].size) {
            return Err(Error::InvalidParam("ensemble sizes must be strictly increasing"));
        }
        if members.iter().any(|m| m.size == 0 || !(m.latency.is_finite() && m.latency > 0.0)) {
            return Err(Error::InvalidParam("ensemble sizes and latencies must be positive"));
        }
        Ok(Self { members })
    }

    /// Latency quadratic in the size ratio, anchored at `full_latency` for
    /// the largest size; accuracy degrades by `recall_step` and `iou_step`
    /// per size below the largest.
    pub fn quadratic(sizes: &[u32], full_latency: f64, recall_step: f64, iou_step: f64) -> Result<Self> {
        let full = *sizes.last().ok_or(Error::InvalidParam("ensemble must not be empty"))? as f64;
        let n = sizes.len();
        Self::new(
            sizes
                .iter()
                .enumerate()
                .map(|(i, &s)| {
                    let ratio = s as f64 / full;
                    let steps = (n - 1 - i) as f64;
                    SizeProfile {
                        size: s,
                        latency: full_latency * ratio * ratio,
                        recall_delta: -recall_step * steps,
                        iou_delta: -iou_step * steps,
                    }
                })
                .collect(),
        )
    }

    pub fn members(&self) -> &[SizeProfile] {
        &self.members
    }

    pub fn max_size(&self) -> u32 {
        self.full().size
    }

    pub fn full(&self) -> &SizeProfile {
        self.members.last().expect("non-empty ensemble")
    }

    pub fn profile(&self, size: u32) -> Option<&SizeProfile> {
        self.members.iter().find(|m| m.size == size)
    }

    pub fn latency(&self, size: u32) -> f64 {
        self.profile(size).map_or(self.full().latency, |m| m.latency)
    }

    pub fn is_latency_monotone(&self) -> bool {
        self.members.windows(2).all(|w| w[0].latency <= w[1].latency)
    }
}

/// How the attentive region is placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionMode {
    /// Last box size, centered on the constant-velocity extrapolation of the
    /// last two box centers.
    Prediction,
    /// Last box scaled by the expansion rate around its own center.
    Expansion,
    /// Expansion sizing around the predicted center.
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentiveConfig {
    pub mode: RegionMode,
    pub expansion_rate: f64,
    /// Consecutive misses after which the next frame is processed whole.
    pub fallback_threshold: u32,
    /// Fixed per-frame cost outside inference, seconds.
    pub overhead: f64,
}

impl Default for AttentiveConfig {
    fn default() -> Self {
        Self {
            mode: RegionMode::Expansion,
            expansion_rate: 2.0,
            fallback_threshold: 1,
            overhead: 0.0,
        }
    }
}

impl AttentiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.expansion_rate.is_finite() && self.expansion_rate >= 1.0) {
            return Err(Error::OutOfRange {
                what: "expansion_rate",
                value: self.expansion_rate,
            });
        }
        if !(self.overhead.is_finite() && self.overhead >= 0.0) {
            return Err(Error::OutOfRange {
                what: "overhead",
                value: self.overhead,
            });
        }
        Ok(())
    }
}

/// Tracking state carried between frames of one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentiveState {
    pub config: AttentiveConfig,
    pub last_box: Option<BBox>,
    pub prev_box: Option<BBox>,
    pub miss_streak: u32,
}

impl AttentiveState {
    pub fn new(config: AttentiveConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            last_box: None,
            prev_box: None,
            miss_streak: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    FullFrame,
    Crop(BBox),
}

fn predicted_center(state: &AttentiveState, last: &BBox) -> (f64, f64) {
    let (cx, cy) = last.center();
    match state.prev_box {
        Some(prev) => {
            let (px, py) = prev.center();
            (2.0 * cx - px, 2.0 * cy - py)
        }
        None => (cx, cy),
    }
}

/// Region of the frame to process next.
pub fn attentive_region(state: &AttentiveState, frame: &FrameMeta) -> Region {
    let Some(last) = state.last_box else {
        return Region::FullFrame;
    };
    if state.miss_streak >= state.config.fallback_threshold.max(1) {
        return Region::FullFrame;
    }
    let rate = state.config.expansion_rate;
    let ((cx, cy), (w, h)) = match state.config.mode {
        RegionMode::Expansion => (last.center(), (rate * last.w, rate * last.h)),
        RegionMode::Prediction => (predicted_center(state, &last), (last.w, last.h)),
        RegionMode::Hybrid => (predicted_center(state, &last), (rate * last.w, rate * last.h)),
    };
    let region = BBox {
        x: cx - w / 2.0,
        y: cy - h / 2.0,
        w,
        h,
    };
    match region.intersection(&frame.bounds()) {
        Some(clipped) => Region::Crop(clipped),
        None => Region::FullFrame,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub size: u32,
    pub transform: CropTransform,
}

/// Smallest ensemble size that holds the region without downscaling; the
/// largest size with a downscale when none does.
pub fn select_network(region: &BBox, ensemble: &EnsembleSpec) -> Selection {
    let side = region.max_side();
    let size = ensemble
        .members()
        .iter()
        .map(|m| m.size)
        .find(|&s| s as f64 >= side)
        .unwrap_or_else(|| ensemble.max_size());
    let scale = if side > size as f64 { size as f64 / side } else { 1.0 };
    Selection {
        size,
        transform: CropTransform {
            origin_x: region.x,
            origin_y: region.y,
            scale,
        },
    }
}

/// Full-frame processing always uses the default (largest) model.
pub fn select_full_frame(frame: &FrameMeta, ensemble: &EnsembleSpec) -> Selection {
    let bounds = frame.bounds();
    let size = ensemble.max_size();
    let side = bounds.max_side();
    Selection {
        size,
        transform: CropTransform {
            origin_x: 0.0,
            origin_y: 0.0,
            scale: if side > size as f64 { size as f64 / side } else { 1.0 },
        },
    }
}

/// One detector invocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pass {
    /// Crop in frame coordinates.
    pub crop: BBox,
    pub selection: Selection,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AggregationPlan {
    /// Crop the bounding union of all regions and run one pass.
    Stitch { pass: Pass, predicted_latency: f64 },
    /// One pass per region.
    PerRegion { passes: Vec<Pass>, predicted_latency: f64 },
}

impl AggregationPlan {
    pub fn passes(&self) -> &[Pass] {
        match self {
            AggregationPlan::Stitch { pass, .. } => core::slice::from_ref(pass),
            AggregationPlan::PerRegion { passes, .. } => passes,
        }
    }

    pub fn predicted_latency(&self) -> f64 {
        match self {
            AggregationPlan::Stitch { predicted_latency, .. } | AggregationPlan::PerRegion { predicted_latency, .. } => {
                *predicted_latency
            }
        }
    }
}

/// Picks the cheaper of one pass over the union of the regions or one pass
/// per region, by predicted ensemble latency. Ties go to per-region passes.
pub fn optimize_aggregation(regions: &[BBox], ensemble: &EnsembleSpec) -> Result<AggregationPlan> {
    let first = regions.first().ok_or(Error::InvalidParam("no regions to aggregate"))?;
    let passes: Vec<Pass> = regions
        .iter()
        .map(|r| Pass {
            crop: *r,
            selection: select_network(r, ensemble),
        })
        .collect();
    let per_region: f64 = passes.iter().map(|p| ensemble.latency(p.selection.size)).sum();
    if regions.len() == 1 {
        return Ok(AggregationPlan::PerRegion {
            passes,
            predicted_latency: per_region,
        });
    }
    let union = regions[1..].iter().fold(*first, |acc, r| acc.union_bounds(r));
    let stitched = Pass {
        crop: union,
        selection: select_network(&union, ensemble),
    };
    let stitched_latency = ensemble.latency(stitched.selection.size);
    Ok(if stitched_latency < per_region {
        AggregationPlan::Stitch {
            pass: stitched,
            predicted_latency: stitched_latency,
        }
    } else {
        AggregationPlan::PerRegion {
            passes,
            predicted_latency: per_region,
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub confidence: f64,
}

/// What a detector returns for one pass: detections in model coordinates
/// and the time the pass took.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectorOutput {
    pub detections: Vec<Detection>,
    pub latency: f64,
}

/// Anything that can run an ensemble member on a crop of the current frame.
pub trait Detector {
    type Error;

    fn detect(&mut self, frame: &FrameMeta, pass: &Pass) -> core::result::Result<DetectorOutput, Self::Error>;
}

/// Detection mapped to frame coordinates, tagged with the region it belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappedDetection {
    pub detection: Detection,
    pub region: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub region: Region,
    pub passes: Vec<Pass>,
    pub detections: Vec<MappedDetection>,
    /// Sum of detector latencies, seconds.
    pub inference: f64,
    pub overhead: f64,
}

impl StepOutput {
    pub fn latency(&self) -> f64 {
        self.inference + self.overhead
    }

    pub fn best(&self) -> Option<&Detection> {
        self.detections
            .iter()
            .map(|d| &d.detection)
            .max_by(|a, b| a.confidence.total_cmp(&b.confidence))
    }
}

fn run_passes<D: Detector>(
    frame: &FrameMeta,
    passes: &[Pass],
    regions: &[BBox],
    detector: &mut D,
) -> core::result::Result<(Vec<MappedDetection>, f64), D::Error> {
    let mut out = Vec::new();
    let mut inference = 0.0;
    for (k, pass) in passes.iter().enumerate() {
        let res = detector.detect(frame, pass)?;
        inference += res.latency;
        for det in res.detections {
            let bbox = pass.selection.transform.map_back(&det.bbox);
            let (cx, cy) = bbox.center();
            let region = if passes.len() == regions.len() {
                k
            } else {
                regions.iter().position(|r| r.contains_point(cx, cy)).unwrap_or(0)
            };
            out.push(MappedDetection {
                detection: Detection { bbox, ..det },
                region,
            });
        }
    }
    Ok((out, inference))
}

impl AttentiveState {
    /// Processes one frame and updates the tracking state from the result.
    pub fn step<D: Detector>(
        &mut self,
        frame: &FrameMeta,
        ensemble: &EnsembleSpec,
        detector: &mut D,
    ) -> core::result::Result<StepOutput, D::Error> {
        let region = attentive_region(self, frame);
        let (passes, regions) = match region {
            Region::FullFrame => {
                let bounds = frame.bounds();
                let pass = Pass {
                    crop: bounds,
                    selection: select_full_frame(frame, ensemble),
                };
                (alloc::vec![pass], alloc::vec![bounds])
            }
            Region::Crop(b) => {
                let plan = optimize_aggregation(core::slice::from_ref(&b), ensemble).expect("one region");
                (plan.passes().to_vec(), alloc::vec![b])
            }
        };
        let (detections, inference) = run_passes(frame, &passes, &regions, detector)?;
        let out = StepOutput {
            region,
            passes,
            detections,
            inference,
            overhead: self.config.overhead,
        };
        match out.best() {
            Some(best) => {
                self.prev_box = self.last_box;
                self.last_box = Some(best.bbox);
                self.miss_streak = 0;
            }
            None => self.miss_streak = self.miss_streak.saturating_add(1),
        }
        Ok(out)
    }
}

/// Processes a frame whole with the default model, as the baseline does.
pub fn full_frame_step<D: Detector>(
    frame: &FrameMeta,
    ensemble: &EnsembleSpec,
    overhead: f64,
    detector: &mut D,
) -> core::result::Result<StepOutput, D::Error> {
    let bounds = frame.bounds();
    let passes = alloc::vec![Pass {
        crop: bounds,
        selection: select_full_frame(frame, ensemble),
    }];
    let (detections, inference) = run_passes(frame, &passes, &[bounds], detector)?;
    Ok(StepOutput {
        region: Region::FullFrame,
        passes,
        detections,
        inference,
        overhead,
    })
}
