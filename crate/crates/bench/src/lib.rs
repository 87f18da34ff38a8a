//! Shared fixtures for the benchmarks.

use cmax_core::synth::{generate, SceneConfig};
use cmax_core::{filter_roi, make_batch, warp_batch, EventBatch, Roi, Velocity, WarpedEvent};

/// The reference workload: one batch of `batch_size` events from the
/// default synthetic square, restricted to a 64x64 ROI around the object.
pub fn roi_batch(batch_size: usize) -> EventBatch {
    let cfg = SceneConfig {
        batch_size,
        batches: 1,
        ..SceneConfig::default()
    };
    let scene = generate(&cfg).expect("default scene is valid");
    let (cx, cy) = scene.truth.trajectory[0].center_ref;
    let roi = Roi::new(cx - 32.0, cy - 32.0, 64, 64).expect("64x64 ROI");
    filter_roi(
        &make_batch(scene.events).expect("generated events are sorted"),
        &roi,
    )
}

/// The batch warped at a velocity near the optimum.
pub fn warped(batch: &EventBatch) -> Vec<WarpedEvent> {
    warp_batch(batch, Velocity::new(2.9, -2.1))
}
