//! Brute-force validators. Each compares a closed form or an optimized
//! routine against an independent reference from `hrcsafe_core::oracle`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hrcsafe_core::attentive::{BBox, Detection};
use hrcsafe_core::collision::{collision_probability, frame_process_oracle, PerceptionProfile};
use hrcsafe_core::geometry::{
    alpha_critical, iou_from_shift, safe_travel_distance, shift_from_iou, EncounterState, SafetyMargins,
};
use hrcsafe_core::metrics::{acp, IntegrationConfig, ParamSpaceD};
use hrcsafe_core::oracle::{reference_evaluate, shifted_square_iou, sweep_safe_distance};
use hrcsafe_core::simkit::{coco_thresholds, evaluate, FrameRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn random_encounter(rng: &mut ChaCha8Rng) -> EncounterState {
    let m = SafetyMargins::split_even(rng.random_range(0.02..0.3)).expect("positive margins");
    let r = m.sum() + rng.random_range(0.01..1.5);
    let u = rng.random_range(0.02..1.0);
    let alpha = if rng.random_bool(0.9) {
        alpha_critical(r, m).expect("outside contact") * rng.random_range(-1.0..1.0)
    } else {
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
    };
    EncounterState::new(r, u, alpha, m).expect("valid encounter")
}

fn random_profile(rng: &mut ChaCha8Rng) -> PerceptionProfile {
    PerceptionProfile::new(
        rng.random_range(0.01..0.06),
        rng.random_range(0.0..0.2),
        rng.random_range(0.3..0.99),
        rng.random_range(0.5..1.0),
    )
    .expect("valid profile")
}

/// Closed-form collision probability against explicit frame stepping.
pub fn closed_form_vs_frames(configs: usize, trials: u64, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agree = 0;
    for i in 0..configs {
        let e = random_encounter(&mut rng);
        let p = random_profile(&mut rng);
        let closed = collision_probability(&e, &p);
        let est = frame_process_oracle(&e, &p, trials, crate::derive_seed(seed, i as u64, 1));
        let sigma = (closed * (1.0 - closed) / trials as f64).sqrt();
        if (est - closed).abs() <= 3.0 * sigma {
            agree += 1;
        }
    }
    let frac = agree as f64 / configs as f64;
    Check {
        name: "closed-form collision probability vs frame process".into(),
        passed: frac >= 0.95,
        detail: format!("{agree}/{configs} configurations within 3 sigma ({trials} trials each)"),
    }
}

/// Safe travel distance against a stepped sphere sweep.
pub fn travel_distance_vs_sweep(encounters: usize, step: f64, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut unreachable = 0;
    for _ in 0..encounters {
        let m = SafetyMargins::split_even(rng.random_range(0.02..0.3)).expect("positive margins");
        let r = m.sum() + rng.random_range(0.01..1.5);
        // Shrink slightly so tangent headings still reach contact under rounding.
        let alpha = alpha_critical(r, m).expect("outside contact") * rng.random_range(-0.999..0.999);
        let e = EncounterState::new(r, rng.random_range(0.02..1.0), alpha, m).expect("valid encounter");
        let closed = safe_travel_distance(&e).expect("in cone");
        match sweep_safe_distance(&e, step) {
            Some(swept) => worst = worst.max((swept - closed).abs()),
            None => unreachable += 1,
        }
    }
    Check {
        name: "safe travel distance vs sphere sweep".into(),
        passed: worst <= 1e-3 && unreachable == 0,
        detail: format!("max |error| {worst:.3e} m over {encounters} encounters (step {step:e} m), {unreachable} never reached contact"),
    }
}

/// Closed-form IoU against overlapping boxes, and the shift roundtrip.
pub fn iou_vs_boxes(shifts: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut iou_err, mut trip_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..shifts {
        let side = rng.random_range(0.001..2.0);
        let b = side * rng.random_range(0.0..=1.0);
        let closed = iou_from_shift(b, side).expect("valid shift");
        iou_err = iou_err.max((closed - shifted_square_iou(b, side)).abs());
        let back = shift_from_iou(closed, side).expect("valid iou");
        trip_err = trip_err.max((back - b).abs() / side);
    }
    Check {
        name: "shift-to-IoU vs box overlap and roundtrip".into(),
        passed: iou_err <= 1e-9 && trip_err <= 1e-9,
        detail: format!("max IoU error {iou_err:.3e}, max roundtrip error {trip_err:.3e} * side over {shifts} shifts"),
    }
}

fn frame(index: u64, dets: Vec<(BBox, f64)>) -> FrameRecord {
    FrameRecord {
        index,
        region: None,
        model_sizes: vec![1280],
        inference: 0.03,
        overhead: 0.005,
        detections: dets.into_iter().map(|(bbox, confidence)| Detection { bbox, confidence }).collect(),
    }
}

fn square(x: f64, y: f64, w: f64, h: f64) -> BBox {
    BBox::new(x, y, w, h).expect("valid box")
}

/// Two frames whose detections overlap by IoU 0.8 and 0.6.
pub fn worked_evaluation_case() -> (Vec<FrameRecord>, Vec<BBox>) {
    let gt = vec![square(0.0, 0.0, 10.0, 10.0); 2];
    let frames = vec![
        frame(0, vec![(square(0.0, 0.0, 8.0, 10.0), 0.9)]),
        frame(1, vec![(square(0.0, 0.0, 6.0, 10.0), 0.8)]),
    ];
    (frames, gt)
}

/// Random cases of at most ten frames on integer coordinates, so both
/// evaluators see exactly representable areas.
pub fn random_evaluation_case(rng: &mut ChaCha8Rng) -> (Vec<FrameRecord>, Vec<BBox>) {
    let n = rng.random_range(1..=10);
    let mut frames = Vec::with_capacity(n);
    let mut gt = Vec::with_capacity(n);
    for i in 0..n {
        let (gx, gy) = (rng.random_range(0..8) as f64, rng.random_range(0..8) as f64);
        let (gw, gh) = (rng.random_range(2..10) as f64, rng.random_range(2..10) as f64);
        gt.push(square(gx, gy, gw, gh));
        let k = rng.random_range(0..=2);
        let dets = (0..k)
            .map(|_| {
                let b = square(
                    gx + rng.random_range(-3..=3) as f64,
                    gy + rng.random_range(-3..=3) as f64,
                    (gw + rng.random_range(-2..=2) as f64).max(1.0),
                    (gh + rng.random_range(-2..=2) as f64).max(1.0),
                );
                // Coarse confidences force ties.
                (b, rng.random_range(1..=5) as f64 / 5.0)
            })
            .collect();
        frames.push(frame(i as u64, dets));
    }
    (frames, gt)
}

/// Evaluator against the exhaustive reference on the worked case plus random ones.
pub fn evaluator_vs_reference(cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let thresholds = coco_thresholds();
    let mut mismatches = 0;
    let (frames, gt) = worked_evaluation_case();
    let worked = evaluate(&frames, &gt, &thresholds).expect("consistent lengths");
    let worked_ok = worked == reference_evaluate(&frames, &gt, &thresholds).expect("consistent lengths")
        && worked.ap75 == 100.0 * 51.0 / 101.0
        && worked.ar == 50.0;
    for _ in 1..cases {
        let (frames, gt) = random_evaluation_case(&mut rng);
        let fast = evaluate(&frames, &gt, &thresholds).expect("consistent lengths");
        let slow = reference_evaluate(&frames, &gt, &thresholds).expect("consistent lengths");
        if fast != slow {
            mismatches += 1;
        }
    }
    Check {
        name: "evaluator vs exhaustive reference".into(),
        passed: worked_ok && mismatches == 0,
        detail: format!(
            "{mismatches} mismatches over {cases} cases; worked case AP75 {} AR {}",
            worked.ap75, worked.ar
        ),
    }
}

/// Agreement of the two ACP estimators for one profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorAgreement {
    pub grid: f64,
    pub monte_carlo: f64,
    pub stderr: f64,
    pub tolerance: f64,
    pub agree: bool,
}

pub fn acp_estimators_agree(
    p: &PerceptionProfile,
    margins: SafetyMargins,
    d: &ParamSpaceD,
    grid: usize,
    samples: usize,
    seed: u64,
) -> hrcsafe_core::Result<EstimatorAgreement> {
    let g = acp(p, margins, d, &IntegrationConfig::grid(grid))?.value;
    let mc = acp(p, margins, d, &IntegrationConfig::monte_carlo(samples, seed))?;
    let stderr = mc.stderr.unwrap_or(0.0);
    let tolerance = (4.0 * stderr).max(0.02 * g.abs());
    Ok(EstimatorAgreement {
        grid: g,
        monte_carlo: mc.value,
        stderr,
        tolerance,
        agree: (g - mc.value).abs() <= tolerance,
    })
}
