//! Frame-process collision model.
//!
//! A detector processes one frame every `t_p` seconds and finds the hand with
//! probability `recall`, independently per frame. The robot closes `u * t_p`
//! meters per frame; it is safe if any of the `m` frames that complete before
//! it covers `L_s` detects the hand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_range, Error, Result};
use crate::geometry::{effective_safe_distance, EncounterState};

/// Relative slack applied before flooring the frame count so exact quotients
/// such as `0.4 / 0.04` do not lose a frame to rounding.
pub const FLOOR_EPS: f64 = 1e-12;

/// Perception metrics of one detector configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerceptionProfile {
    /// Perception latency per frame, seconds.
    pub t_p: f64,
    /// Response latency, seconds.
    pub t_r: f64,
    /// Per-frame detection probability.
    pub recall: f64,
    /// Mean IoU of detections.
    pub iou: f64,
}

impl PerceptionProfile {
    pub fn new(t_p: f64, t_r: f64, recall: f64, iou: f64) -> Result<Self> {
        if !(t_p.is_finite() && t_p > 0.0) {
            return Err(Error::OutOfRange { what: "t_p", value: t_p });
        }
        check_range("t_r", t_r, 0.0, f64::INFINITY)?;
        check_range("recall", recall, 0.0, 1.0)?;
        check_range("iou", iou, 0.0, 1.0)?;
        Ok(Self { t_p, t_r, recall, iou })
    }

    pub fn with_t_r(self, t_r: f64) -> Self {
        Self { t_r, ..self }
    }
}

/// Number of frames processed before the robot covers the safe distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrameBudget(pub u64);

/// Total latency per frame, `t_p + t_r`.
pub fn total_latency(p: &PerceptionProfile) -> f64 {
    p.t_p + p.t_r
}

/// Probability that the first `m` frames all miss: `(1 - p_d)^m`.
pub fn geometric_tail(p_d: f64, m: FrameBudget) -> f64 {
    if m.0 == 0 {
        return 1.0;
    }
    let q = 1.0 - p_d;
    match i32::try_from(m.0) {
        Ok(k) => libm::pow(q, k as f64),
        Err(_) => libm::pow(q, m.0 as f64),
    }
}

pub fn frame_budget(l_s: f64, u: f64, t_p: f64) -> Result<FrameBudget> {
    check_range("l_s", l_s, 0.0, f64::INFINITY)?;
    if u == 0.0 {
        return Err(Error::ZeroSpeed);
    }
    check_range("u", u, 0.0, f64::INFINITY)?;
    if !(t_p.is_finite() && t_p > 0.0) {
        return Err(Error::OutOfRange { what: "t_p", value: t_p });
    }
    let frames = libm::floor(l_s / (u * t_p) * (1.0 + FLOOR_EPS));
    Ok(FrameBudget(frames as u64))
}

/// Closed-form collision probability of one encounter.
///
/// Contact at the start is a collision. No relative approach or a heading
/// outside the cone cannot collide. Otherwise the hand must be missed in
/// every one of the `m` frames that fit inside the effective safe distance.
pub fn collision_probability(e: &EncounterState, p: &PerceptionProfile) -> f64 {
    if e.in_contact() {
        return 1.0;
    }
    if e.u == 0.0 || !e.in_cone() {
        return 0.0;
    }
    let l_s = effective_safe_distance(e, p.iou, p.t_r).expect("encounter checked in cone");
    let m = frame_budget(l_s, e.u, p.t_p).expect("u > 0 and t_p > 0");
    geometric_tail(p.recall, m)
}

/// Monte-Carlo estimate of [`collision_probability`] by stepping through
/// frames explicitly.
///
/// Each trial advances the robot `u * t_p` per frame and draws an independent
/// Bernoulli(`recall`) detection for every frame that completes before the
/// robot has travelled `L_s`. A trial collides if no such frame detects.
pub fn frame_process_oracle(e: &EncounterState, p: &PerceptionProfile, trials: u64, seed: u64) -> f64 {
    assert!(trials >= 1, "at least one trial is required");
    let s = e.margins.sum();
    if e.r <= s {
        return 1.0;
    }
    // Approaching and passing within the contact distance at closest approach.
    let approaching = libm::cos(e.alpha) > 0.0;
    let miss_distance = e.r * libm::fabs(libm::sin(e.alpha));
    if e.u == 0.0 || !approaching || miss_distance > s {
        return 0.0;
    }
    let l_s = match effective_safe_distance(e, p.iou, p.t_r) {
        Ok(l) => l,
        // Tangent headings that round to just outside the cone.
        Err(_) => return 0.0,
    };
    let per_frame = e.u * p.t_p;
    let reach = l_s * (1.0 + FLOOR_EPS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut collisions = 0u64;
    for _ in 0..trials {
        let mut frame = 1u64;
        let detected = loop {
            if frame as f64 * per_frame > reach {
                break false;
            }
            if rng.random::<f64>() < p.recall {
                break true;
            }
            frame += 1;
        };
        if !detected {
            collisions += 1;
        }
    }
    collisions as f64 / trials as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SafetyMargins;
    use core::f64::consts::PI;

    fn e6_baseline() -> PerceptionProfile {
        PerceptionProfile::new(0.040599, 0.1, 0.89869, 0.750).unwrap()
    }

    fn head_on(r: f64, u: f64) -> EncounterState {
        EncounterState::new(r, u, 0.0, SafetyMargins::split_even(0.1).unwrap()).unwrap()
    }

    #[test]
    fn total_latency_cases() {
        assert!((total_latency(&e6_baseline()) - 0.140599).abs() < 1e-15);
        let ours = PerceptionProfile::new(0.030882, 0.1, 0.88670, 0.738).unwrap();
        assert!((total_latency(&ours) - 0.130882).abs() < 1e-15);
        assert!(PerceptionProfile::new(0.0, 0.0, 0.5, 0.5).is_err());
        assert!(PerceptionProfile::new(0.1, 0.0, 1.5, 0.5).is_err());
    }

    #[test]
    fn geometric_tail_cases() {
        assert!((geometric_tail(0.9, FrameBudget(2)) - 0.01).abs() < 1e-15);
        assert_eq!(geometric_tail(1.0, FrameBudget(5)), 0.0);
        assert_eq!(geometric_tail(0.37, FrameBudget(0)), 1.0);
        assert_eq!(geometric_tail(0.0, FrameBudget(0)), 1.0);
    }

    #[test]
    fn frame_budget_cases() {
        assert_eq!(frame_budget(0.4, 1.0, 0.04).unwrap(), FrameBudget(10));
        assert_eq!(frame_budget(0.294755, 1.0, 0.040599).unwrap(), FrameBudget(7));
        assert_eq!(frame_budget(0.0, 0.3, 0.02).unwrap(), FrameBudget(0));
        assert_eq!(frame_budget(0.3, 0.0, 0.02), Err(Error::ZeroSpeed));
        // 0.3 / (0.1 * 0.1) is 29.999999999999996 in f64
        assert_eq!(frame_budget(0.3, 0.1, 0.1).unwrap(), FrameBudget(30));
    }

    #[test]
    fn collision_probability_cases() {
        let p = e6_baseline();
        let pc = collision_probability(&head_on(0.5, 1.0), &p);
        let expected = libm::pow(1.0 - 0.89869, 7.0);
        assert!((pc - expected).abs() <= 1e-12 * expected);
        assert!((pc - 1.095e-7).abs() < 1e-9);

        let m = SafetyMargins::split_even(0.1).unwrap();
        let receding = EncounterState::new(0.5, 1.0, PI, m).unwrap();
        assert_eq!(collision_probability(&receding, &p), 0.0);
        assert_eq!(collision_probability(&head_on(0.05, 1.0), &p), 1.0);
        let still = EncounterState::new(0.5, 0.0, 0.0, m).unwrap();
        assert_eq!(collision_probability(&still, &p), 0.0);
    }

    #[test]
    fn oracle_trivial_cases() {
        let e = head_on(0.5, 1.0);
        let sure = PerceptionProfile::new(0.04, 0.1, 1.0, 1.0).unwrap();
        assert_eq!(frame_process_oracle(&e, &sure, 1000, 1), 0.0);
        let blind = PerceptionProfile::new(0.04, 0.1, 0.0, 1.0).unwrap();
        assert_eq!(frame_process_oracle(&e, &blind, 1000, 1), 1.0);
        assert_eq!(frame_process_oracle(&head_on(0.05, 1.0), &sure, 10, 1), 1.0);
    }

    #[test]
    fn oracle_binomial_bound() {
        // L_s = 0.4 - 0.1 = 0.3 with iou = 1, t_r = 0.1; t_p = 0.1 gives m = 3.
        let e = head_on(0.5, 1.0);
        let p = PerceptionProfile::new(0.1, 0.1, 0.5, 1.0).unwrap();
        assert_eq!(
            frame_budget(effective_safe_distance(&e, 1.0, 0.1).unwrap(), 1.0, 0.1).unwrap(),
            FrameBudget(3)
        );
        let n = 1_000_000u64;
        let est = frame_process_oracle(&e, &p, n, 42);
        let sigma = libm::sqrt(0.125 * 0.875 / n as f64);
        assert!((est - 0.125).abs() <= 3.0 * sigma, "{est}");
    }

    #[test]
    fn oracle_is_deterministic() {
        let e = head_on(0.7, 0.5);
        let p = e6_baseline();
        assert_eq!(frame_process_oracle(&e, &p, 5000, 9), frame_process_oracle(&e, &p, 5000, 9));
    }
}
