//! Randomised invariants of the simulator, the pipeline and the decision rule.

use headmotion::dsp::{build_matrix, mean_subtract, MagnitudeScale};
use headmotion::eval::decide;
use headmotion::radar_sim::{
    beat_frame, draw_scene, motion_trajectory, simulate_sample, FrameSignal, HeadMotion, MotionParams,
    RadarConfig, Reflector, SceneDefaults, MOTION_WINDOW_M,
};
use proptest::prelude::*;

fn reflector() -> impl Strategy<Value = Reflector> {
    (0.0..2.0f64, 0.0..3.0f64, -3.2..3.2f64).prop_map(|(r, a, p)| Reflector::new(r, a, p).unwrap())
}

fn class() -> impl Strategy<Value = HeadMotion> {
    (0u8..4).prop_map(|l| HeadMotion::try_from(l).unwrap())
}

/// Frames of dyadic rationals, so every sum and mean below is exact.
fn dyadic_frames() -> impl Strategy<Value = Vec<FrameSignal>> {
    (prop_oneof![Just(2usize), Just(4), Just(8), Just(16)], 1usize..6).prop_flat_map(|(frames, len)| {
        prop::collection::vec(prop::collection::vec(-512i32..512, len), frames)
            .prop_map(|fs| fs.into_iter().map(|f| FrameSignal(f.into_iter().map(|v| v as f64 / 64.0).collect())).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn superposition(a in prop::collection::vec(reflector(), 0..4), b in prop::collection::vec(reflector(), 0..4)) {
        let cfg = RadarConfig::default();
        let fa = beat_frame(&cfg, &a).unwrap();
        let fb = beat_frame(&cfg, &b).unwrap();
        let all: Vec<Reflector> = a.iter().chain(&b).copied().collect();
        let fab = beat_frame(&cfg, &all).unwrap();
        for i in 0..256 {
            prop_assert!((fab.0[i] - fa.0[i] - fb.0[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn beat_signal_is_bounded(rs in prop::collection::vec(reflector(), 0..6)) {
        let cfg = RadarConfig::default();
        let bound: f64 = rs.iter().map(|r| r.amplitude / 2.0).sum();
        let f = beat_frame(&cfg, &rs).unwrap();
        prop_assert!(f.0.iter().all(|v| v.abs() <= bound + 1e-12));
    }

    #[test]
    fn mean_subtract_is_exactly_idempotent(frames in dyadic_frames()) {
        let once = mean_subtract(&frames).unwrap();
        let twice = mean_subtract(&once).unwrap();
        prop_assert_eq!(&once, &twice);
        for n in 0..once[0].len() {
            prop_assert_eq!(once.iter().map(|f| f.0[n]).sum::<f64>(), 0.0);
        }
    }

    #[test]
    fn mean_subtract_is_idempotent_for_simulated_frames(c in class(), seed in any::<u64>()) {
        let cfg = RadarConfig::default();
        let scene = draw_scene(c, &SceneDefaults::default(), &cfg, seed).unwrap();
        let frames = simulate_sample(&cfg, &scene).unwrap();
        let once = mean_subtract(&frames).unwrap();
        let twice = mean_subtract(&once).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            for (x, y) in a.0.iter().zip(&b.0) {
                prop_assert!((x - y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn build_matrix_ignores_global_gain(c in class(), seed in any::<u64>(), gain in 1e-3..1e3f64, exp in -8i32..8) {
        let cfg = RadarConfig::default();
        let scene = draw_scene(c, &SceneDefaults::default(), &cfg, seed).unwrap();
        let frames = simulate_sample(&cfg, &scene).unwrap();
        let base = build_matrix(&frames, &cfg, c.label(), MagnitudeScale::Linear).unwrap();
        let scaled: Vec<FrameSignal> = frames.iter().map(|f| FrameSignal(f.0.iter().map(|v| v * gain).collect())).collect();
        let m = build_matrix(&scaled, &cfg, c.label(), MagnitudeScale::Linear).unwrap();
        for (a, b) in base.data.iter().zip(&m.data) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        // power-of-two gains are exact all the way through
        let p = 2f64.powi(exp);
        let dyadic: Vec<FrameSignal> = frames.iter().map(|f| FrameSignal(f.0.iter().map(|v| v * p).collect())).collect();
        let m = build_matrix(&dyadic, &cfg, c.label(), MagnitudeScale::Linear).unwrap();
        prop_assert_eq!(&base.data, &m.data);
    }

    #[test]
    fn trajectories_stay_in_window(c in class(), seed in any::<u64>()) {
        let cfg = RadarConfig::default();
        let p = motion_trajectory(c, &MotionParams::default(), &cfg, seed).unwrap();
        prop_assert_eq!(p.range_m.len(), 30);
        prop_assert!(p.range_m.iter().all(|&r| (MOTION_WINDOW_M.0..=MOTION_WINDOW_M.1).contains(&r)));
        prop_assert!(p.amplitude.iter().all(|&a| a >= 0.0));
    }

    #[test]
    fn decision_ignores_common_shift(scores in prop::collection::vec(0.0..1.0f64, 4), shift in -0.5..0.5f64) {
        let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
        let d = decide(&scores);
        prop_assert!(d < 4);
        // a shift can only matter if it collapses two scores into a tie
        let distinct = scores.iter().enumerate().all(|(i, a)| scores.iter().skip(i + 1).all(|b| (a - b).abs() > 1e-9));
        if distinct {
            prop_assert_eq!(decide(&shifted), d);
        }
    }
}
