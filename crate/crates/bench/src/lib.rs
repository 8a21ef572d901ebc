//! Fixtures shared by the benchmarks.

use perfcast_core::synth::{render_screencast, SceneSpec, TransitionStyle};
use perfcast_core::{ActionType, InteractionMeta, Screencast};

/// A tap screencast of `width` x `height` frames lasting about `duration_ms`.
pub fn tap_screencast(width: usize, height: usize, duration_ms: f64) -> Screencast {
    let scene = SceneSpec {
        width,
        height,
        refresh_hz: 60.0,
        action_type: ActionType::Tap,
        response_at_ms: duration_ms * 0.1,
        finish_at_ms: duration_ms * 0.6,
        transition_style: TransitionStyle::Abrupt,
        drop_schedule: Vec::new(),
        noise_amplitude: 2,
        duration_ms,
        seed: 7,
    };
    let meta = InteractionMeta {
        app_id: "bench".into(),
        scenario_id: "bench".into(),
        interaction_id: "bench-tap".into(),
        action_type: ActionType::Tap,
        action_x: Some(1.0),
        action_y: Some(1.0),
        action_timestamp_ms: 0.0,
        os_version: "base".into(),
        run_index: 0,
        device_refresh_hz: 60.0,
    };
    render_screencast(&scene, &meta).expect("valid bench scene").0
}

/// Deterministic pseudo-random samples around `center`.
pub fn samples(n: usize, center: f64, salt: u64) -> Vec<f64> {
    let mut state = salt.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            center + ((state >> 33) % 1000) as f64 / 10.0
        })
        .collect()
}
