//! The cycle model's per-iteration terms against the work the software
//! pipeline actually performs.

use cmax_core::cyclemodel::CycleParams;
use cmax_core::synth::{generate, SceneConfig};
use cmax_core::voting::AccumulatorMode;
use cmax_core::{
    cycles_per_batch, estimate_motion, filter_roi, make_batch, track, OptimizerConfig, Roi, TrackerConfig,
};

#[test]
fn votes_and_readouts_match_model_terms() {
    let scene = generate(&SceneConfig {
        batches: 1,
        ..SceneConfig::default()
    })
    .unwrap();
    let c = scene.truth.trajectory[0].center_ref;
    let roi = Roi::new(c.0 - 32.0, c.1 - 32.0, 64, 64).unwrap();
    let batch = make_batch(scene.events).unwrap();
    let selected = filter_roi(&batch, &roi);
    let n = selected.len() as u64;

    for mode in [AccumulatorMode::Naive, AccumulatorMode::Banked] {
        let cfg = OptimizerConfig {
            iterations: 100,
            accumulator_mode: mode,
            ..OptimizerConfig::default()
        };
        let (_, trace) = estimate_motion(&selected, (64, 64), &cfg).unwrap();
        let t = trace.records.len() as u64;
        assert_eq!(trace.stats.votes_issued, t * n);
        assert_eq!(trace.stats.readout_addresses, t * (4096 / 4) * 4);

        let p = CycleParams {
            total_events: batch.len() as u64,
            iterations: t,
            roi_events: trace.stats.votes_issued / t,
            roi_pixels: trace.stats.readout_addresses / t,
            ..CycleParams::default()
        };
        let expected = batch.len() as u64 + 100 * (n + 32 + 1024 + 35);
        assert_eq!(cycles_per_batch(&p).unwrap(), expected);
    }
}

#[test]
fn tracker_records_per_batch_work() {
    let scene = generate(&SceneConfig {
        batches: 3,
        ..SceneConfig::default()
    })
    .unwrap();
    let c = scene.truth.trajectory[0].center_ref;
    let cfg = TrackerConfig {
        roi_init: Roi::new(c.0 - 32.0, c.1 - 32.0, 64, 64).unwrap(),
        optimizer: OptimizerConfig {
            iterations: 10,
            ..OptimizerConfig::default()
        },
        roi_update_scale: 2.0,
        ..TrackerConfig::default()
    };
    let result = track(&scene.events, &cfg).unwrap();
    assert_eq!(result.records.len(), 3);
    for r in &result.records {
        assert_eq!(r.stats.votes_issued, 10 * r.events_in_roi as u64);
        assert_eq!(r.stats.readout_addresses, 10 * 4096);
    }
}
