use hrcsafe_core::attentive::*;
use hrcsafe_core::collision::*;
use hrcsafe_core::geometry::*;
use hrcsafe_core::oracle::{reference_evaluate, shifted_square_iou};
use hrcsafe_core::simkit::{coco_thresholds, evaluate, FrameRecord};
use proptest::prelude::*;

fn margins() -> impl Strategy<Value = SafetyMargins> {
    (0.01f64..0.15, 0.01f64..0.15).prop_map(|(a, b)| SafetyMargins::new(a, b).unwrap())
}

/// Encounter strictly inside the cone, as (state, alpha_c).
fn in_cone() -> impl Strategy<Value = (EncounterState, f64)> {
    (margins(), 0.01f64..1.5, 0.01f64..1.5, -1.0f64..1.0).prop_map(|(m, extra, u, frac)| {
        let r = m.sum() + extra;
        let ac = alpha_critical(r, m).unwrap();
        (EncounterState::new(r, u, frac * ac, m).unwrap(), ac)
    })
}

fn profile() -> impl Strategy<Value = PerceptionProfile> {
    (0.005f64..0.1, 0.0f64..0.3, 0.0f64..=1.0, 0.0f64..=1.0)
        .prop_map(|(tp, tr, rec, iou)| PerceptionProfile::new(tp, tr, rec, iou).unwrap())
}

proptest! {
    #[test]
    fn shift_iou_roundtrip(s_b in 0.001f64..1.0, frac in 0.0f64..=1.0) {
        let b = frac * s_b;
        let back = shift_from_iou(iou_from_shift(b, s_b).unwrap(), s_b).unwrap();
        prop_assert!((back - b).abs() <= 1e-9 * s_b);
    }

    #[test]
    fn iou_strictly_decreasing_in_shift(s_b in 0.001f64..1.0, a in 0.0f64..1.0, d in 1e-6f64..0.5) {
        let (b0, b1) = (a * s_b, ((a + d).min(1.0)) * s_b);
        prop_assume!(b1 > b0);
        prop_assert!(iou_from_shift(b1, s_b).unwrap() < iou_from_shift(b0, s_b).unwrap());
    }

    #[test]
    fn closed_form_iou_matches_box_overlap(s_b in 0.001f64..10.0, frac in 0.0f64..=1.0) {
        let b = frac * s_b;
        let brute = shifted_square_iou(b, s_b);
        prop_assert!((iou_from_shift(b, s_b).unwrap() - brute).abs() <= 1e-9);
    }

    #[test]
    fn travel_distance_even_and_monotone((e, ac) in in_cone(), f2 in 0.0f64..=1.0) {
        let l = safe_travel_distance(&e).unwrap();
        let mirrored = EncounterState { alpha: -e.alpha, ..e };
        prop_assert!((safe_travel_distance(&mirrored).unwrap() - l).abs() <= 1e-12);
        // Oblique approaches travel further before touching the contact sphere.
        let wider = EncounterState { alpha: e.alpha.abs().max(f2 * ac), ..e };
        prop_assert!(safe_travel_distance(&wider).unwrap() >= l - 1e-12);
        let s = e.margins.sum();
        let head_on = EncounterState { alpha: 0.0, ..e };
        prop_assert!((safe_travel_distance(&head_on).unwrap() - (e.r - s)).abs() <= 1e-12);
        let tangent = EncounterState { alpha: ac, ..e };
        let expected = (e.r * e.r - s * s).sqrt();
        prop_assert!((safe_travel_distance(&tangent).unwrap() - expected).abs() <= 1e-6 * e.r);
        prop_assert!(l >= e.r - s - 1e-12 && l <= expected + 1e-6 * e.r);
    }

    #[test]
    fn effective_distance_bounds_and_monotonicity(
        (e, _) in in_cone(), iou in 0.0f64..=1.0, d_iou in 0.0f64..0.5, t_r in 0.0f64..0.5, d_t in 0.0f64..0.5, k in 1.0f64..3.0,
    ) {
        let l = safe_travel_distance(&e).unwrap();
        let ls = effective_safe_distance(&e, iou, t_r).unwrap();
        prop_assert!((0.0..=l).contains(&ls));
        let better = (iou + d_iou).min(1.0);
        prop_assert!(effective_safe_distance(&e, better, t_r).unwrap() >= ls - 1e-12);
        prop_assert!(effective_safe_distance(&e, iou, t_r + d_t).unwrap() <= ls + 1e-12);
        let faster = EncounterState { u: e.u * k, ..e };
        prop_assert!(effective_safe_distance(&faster, iou, t_r).unwrap() <= ls + 1e-12);
        let perfect = effective_safe_distance(&e, 1.0, t_r).unwrap();
        prop_assert!((perfect - (l - e.u * t_r).max(0.0)).abs() <= 1e-12);
    }

    #[test]
    fn collision_probability_monotone(
        (e, _) in in_cone(), p in profile(), dr in 0.0f64..0.5, di in 0.0f64..0.5, dtp in 0.0f64..0.05, dtr in 0.0f64..0.2,
    ) {
        let base = collision_probability(&e, &p);
        let more_recall = PerceptionProfile { recall: (p.recall + dr).min(1.0), ..p };
        prop_assert!(collision_probability(&e, &more_recall) <= base);
        let more_iou = PerceptionProfile { iou: (p.iou + di).min(1.0), ..p };
        prop_assert!(collision_probability(&e, &more_iou) <= base);
        let slower = PerceptionProfile { t_p: p.t_p + dtp, ..p };
        prop_assert!(collision_probability(&e, &slower) >= base);
        let later = PerceptionProfile { t_r: p.t_r + dtr, ..p };
        prop_assert!(collision_probability(&e, &later) >= base);
    }

    #[test]
    fn collision_probability_is_a_geometric_tail((e, _) in in_cone(), p in profile()) {
        let pc = collision_probability(&e, &p);
        let l_s = effective_safe_distance(&e, p.iou, p.t_r).unwrap();
        let m = frame_budget(l_s, e.u, p.t_p).unwrap();
        prop_assert_eq!(pc, geometric_tail(p.recall, m));
        prop_assert!(pc == 0.0 || pc == 1.0 || (0..=m.0).any(|k| geometric_tail(p.recall, FrameBudget(k)) == pc));
    }

    #[test]
    fn frame_budget_scale_invariant(l_s in 0.0f64..2.0, u in 0.01f64..2.0, t_p in 0.001f64..0.2, j in -6i32..6) {
        let k = 2f64.powi(j);
        prop_assert_eq!(frame_budget(l_s, u, t_p).unwrap(), frame_budget(l_s * k, u * k, t_p).unwrap());
    }

    #[test]
    fn outside_cone_or_receding_is_safe(m in margins(), extra in 0.01f64..1.0, u in 0.01f64..1.0, p in profile(), f in 1.001f64..10.0) {
        let r = m.sum() + extra;
        let ac = alpha_critical(r, m).unwrap();
        let alpha = (ac * f).min(std::f64::consts::PI);
        let e = EncounterState::new(r, u, alpha, m).unwrap();
        prop_assert_eq!(collision_probability(&e, &p), 0.0);
    }

    #[test]
    fn select_network_monotone(a in 1.0f64..2000.0, b in 1.0f64..2000.0) {
        let k = EnsembleSpec::quadratic(&[320, 640, 960, 1280], 0.035, 0.005, 0.005).unwrap();
        let (small, large) = if a <= b { (a, b) } else { (b, a) };
        let s = select_network(&BBox::new(0.0, 0.0, small, small).unwrap(), &k).size;
        let l = select_network(&BBox::new(0.0, 0.0, large, large * 0.5).unwrap(), &k).size;
        prop_assert!(s <= l);
    }

    #[test]
    fn map_back_inverts_forward(
        ox in -500.0f64..1500.0, oy in -500.0f64..1500.0, scale in 0.05f64..4.0,
        x in -100.0f64..2000.0, y in -100.0f64..2000.0, w in 0.5f64..800.0, h in 0.5f64..800.0,
    ) {
        let t = CropTransform { origin_x: ox, origin_y: oy, scale };
        let b = BBox::new(x, y, w, h).unwrap();
        let back = map_back(&t.forward(&b), &t);
        prop_assert!((back.x - b.x).abs() < 1e-9 && (back.y - b.y).abs() < 1e-9);
        prop_assert!((back.w - b.w).abs() < 1e-9 && (back.h - b.h).abs() < 1e-9);
    }

    /// Expansion keeps the next box inside the region whenever its center
    /// moves at most (rate - 1) / 2 of the old box's shorter side and it does
    /// not grow.
    #[test]
    fn expansion_region_contains_bounded_motion(
        rate in 1.0f64..4.0, w in 10.0f64..200.0, h in 10.0f64..200.0,
        cx in 200.0f64..1000.0, cy in 200.0f64..500.0,
        fx in -1.0f64..=1.0, fy in -1.0f64..=1.0, shrink in 0.2f64..=1.0,
    ) {
        let frame = FrameMeta { width: 1280, height: 720, index: 1, timestamp: 0.0 };
        let last = BBox::from_center(cx, cy, w, h).unwrap();
        let mut state = AttentiveState::new(AttentiveConfig { expansion_rate: rate, ..Default::default() }).unwrap();
        state.last_box = Some(last);
        let reach = (rate - 1.0) / 2.0 * w.min(h);
        let next = BBox::from_center(cx + fx * reach, cy + fy * reach, w * shrink, h * shrink).unwrap();
        let next = next.intersection(&frame.bounds()).unwrap();
        match attentive_region(&state, &frame) {
            Region::Crop(region) => {
                let slack = 1e-9;
                prop_assert!(next.x >= region.x - slack && next.y >= region.y - slack);
                prop_assert!(next.right() <= region.right() + slack && next.bottom() <= region.bottom() + slack);
            }
            Region::FullFrame => prop_assert!(false, "tracking state produced a full frame"),
        }
    }

    #[test]
    fn evaluator_matches_reference(
        frames in prop::collection::vec(
            prop::collection::vec((0i32..12, 0i32..12, 1i32..12, 1i32..12, 0u8..6), 0..3),
            1..=10,
        ),
        gts in prop::collection::vec((0i32..8, 0i32..8, 2i32..10, 2i32..10), 10),
    ) {
        let gt: Vec<BBox> = gts[..frames.len()]
            .iter()
            .map(|&(x, y, w, h)| BBox::new(x as f64, y as f64, w as f64, h as f64).unwrap())
            .collect();
        let recs: Vec<FrameRecord> = frames
            .iter()
            .enumerate()
            .map(|(i, dets)| FrameRecord {
                index: i as u64,
                region: None,
                model_sizes: vec![1280],
                inference: 0.02 + 0.001 * i as f64,
                overhead: 0.005,
                detections: dets
                    .iter()
                    .map(|&(x, y, w, h, c)| Detection {
                        bbox: BBox::new(x as f64, y as f64, w as f64, h as f64).unwrap(),
                        confidence: c as f64 / 5.0,
                    })
                    .collect(),
            })
            .collect();
        let fast = evaluate(&recs, &gt, &coco_thresholds()).unwrap();
        let slow = reference_evaluate(&recs, &gt, &coco_thresholds()).unwrap();
        prop_assert_eq!(fast, slow);
    }
}

#[test]
fn oracle_agrees_with_closed_form_on_random_configs() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let n = 40;
    let mut agree = 0;
    for i in 0..n {
        let m = SafetyMargins::split_even(rng.random_range(0.04..0.3)).unwrap();
        let r = m.sum() + rng.random_range(0.02..1.2);
        let ac = alpha_critical(r, m).unwrap();
        let e = EncounterState::new(r, rng.random_range(0.05..1.0), ac * rng.random_range(-1.0..1.0), m).unwrap();
        let p = PerceptionProfile::new(
            rng.random_range(0.01..0.06),
            rng.random_range(0.0..0.2),
            rng.random_range(0.2..1.0),
            rng.random_range(0.5..1.0),
        )
        .unwrap();
        let trials = 20_000;
        let closed = collision_probability(&e, &p);
        let est = frame_process_oracle(&e, &p, trials, i);
        let sigma = (closed * (1.0 - closed) / trials as f64).sqrt();
        if (est - closed).abs() <= 3.0 * sigma {
            agree += 1;
        }
    }
    assert!(agree as f64 >= 0.95 * n as f64, "{agree}/{n}");
}
