//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use cmax_core::cyclemodel::CycleParams;
use cmax_core::optimizer::contrast_at;
use cmax_core::synth::{generate, SceneConfig, Shape, SyntheticScene};
use cmax_core::voting::stencil;
use cmax_core::{
    accumulate_banked, accumulate_naive, analytic_gradient, batch_time, contrast, cycles_per_batch,
    estimate_motion, filter_roi, make_batch, track, warp_batch, Accumulator, BankedAccumulator, Event,
    EventBatch, OptimizerConfig, Polarity, Roi, TrackerConfig, Velocity, WarpedEvent,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn cycle_model_fidelity() -> Outcome {
    let p = CycleParams::default();
    let cycles = cycles_per_batch(&p).map_err(|e| e.to_string())?;
    let ms = batch_time(&p).map_err(|e| e.to_string())? * 1e3;
    let shown = format!("{ms:.4}");
    let two_sig = format!("{ms:.2}");
    check(
        cycles == 194_100 && shown == "0.9243" && two_sig == "0.92",
        format!("{cycles} cycles, {shown} ms (reported 0.92 ms)"),
    )
}

fn second_timing_claim() -> Outcome {
    let p = CycleParams {
        total_events: 5000,
        iterations: 90,
        roi_events: 5000,
        roi_pixels: 240 * 180,
        clock_hz: 200e6,
        ..CycleParams::default()
    };
    let cycles = cycles_per_batch(&p).map_err(|e| e.to_string())?;
    let ms = batch_time(&p).map_err(|e| e.to_string())? * 1e3;
    let rel = (ms - 7.2).abs() / 7.2;
    check(
        cycles == 1_433_030 && format!("{ms:.3}") == "7.165" && rel <= 0.01,
        format!("{cycles} cycles, {ms:.3} ms vs reported 7.2 ms (rel {rel:.4})"),
    )
}

const FD_STEP: f64 = 1e-4;

fn fd_contrast(batch: &EventBatch, v: Velocity) -> f64 {
    contrast(&accumulate_naive(&warp_batch(batch, v), 64, 64).unwrap().iwe).0
}

fn gradient_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let (mut cases, mut resampled) = (0, 0);
    while cases < 200 {
        let n = rng.gen_range(50..=500);
        let mut ts: Vec<u64> = (0..n).map(|_| rng.gen_range(0..20_000)).collect();
        ts.sort_unstable();
        let events = ts
            .into_iter()
            .map(|t| Event::new(t, rng.gen_range(12..52), rng.gen_range(12..52), Polarity::On))
            .collect();
        let batch = make_batch(events).unwrap();
        let v = Velocity::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
        let warped = warp_batch(&batch, v);
        let kink = |c: f64| (c - c.round()).abs() < 2.0 * FD_STEP;
        if warped.iter().any(|w| kink(w.xw) || kink(w.yw)) {
            resampled += 1;
            continue;
        }
        let g = analytic_gradient(&accumulate_naive(&warped, 64, 64).unwrap());
        let ex = Velocity::new(FD_STEP, 0.0);
        let ey = Velocity::new(0.0, FD_STEP);
        let fx = (fd_contrast(&batch, v + ex) - fd_contrast(&batch, v - ex)) / (2.0 * FD_STEP);
        let fy = (fd_contrast(&batch, v + ey) - fd_contrast(&batch, v - ey)) / (2.0 * FD_STEP);
        for (a, f) in [(g.d_vx, fx), (g.d_vy, fy)] {
            worst = worst.max((a - f).abs() / a.abs().max(f.abs()));
        }
        cases += 1;
    }
    check(
        worst <= 1e-3,
        format!("{cases} batches ({resampled} resampled near kinks), worst relative error {worst:.2e}"),
    )
}

/// Random warped stream on a 64x64 grid. Adversarial streams repeat the
/// previous position with high probability.
fn random_stream(rng: &mut ChaCha8Rng, adversarial: bool) -> Vec<WarpedEvent> {
    let n = rng.gen_range(1..400);
    let clustered = rng.gen_bool(0.5);
    let mut out: Vec<WarpedEvent> = Vec::with_capacity(n);
    for _ in 0..n {
        let norm_dt = rng.gen_range(-1.0..=1.0);
        let repeat = adversarial && rng.gen_bool(0.8);
        let (xw, yw) = match out.last() {
            Some(prev) if repeat => (
                prev.xw.floor() + rng.gen::<f64>(),
                prev.yw.floor() + rng.gen::<f64>(),
            ),
            _ if clustered => (rng.gen_range(20.0..24.0), rng.gen_range(30.0..34.0)),
            _ => (rng.gen_range(-2.0..66.0), rng.gen_range(-2.0..66.0)),
        };
        out.push(WarpedEvent { xw, yw, norm_dt });
    }
    out
}

fn same_address_fraction(stream: &[WarpedEvent]) -> f64 {
    if stream.len() < 2 {
        return 1.0;
    }
    let hits = stream
        .windows(2)
        .filter(|w| w[0].xw.floor() == w[1].xw.floor() && w[0].yw.floor() == w[1].yw.floor())
        .count();
    hits as f64 / (stream.len() - 1) as f64
}

fn accumulator_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut adversarial, mut mismatches, mut broken_failures) = (0, 0, 0);
    for k in 0..1500 {
        let adv = k % 2 == 0;
        let stream = random_stream(&mut rng, adv);
        if adv && stream.len() >= 20 && same_address_fraction(&stream) >= 0.5 {
            adversarial += 1;
        }
        let naive = accumulate_naive(&stream, 64, 64).unwrap();
        let banked = accumulate_banked(&stream, 64, 64).unwrap();
        if naive != banked {
            mismatches += 1;
        }
        if adv {
            let mut broken = BankedAccumulator::with_forwarding(64, 64, false).unwrap();
            broken.accumulate(&stream);
            if broken.clear_on_read() != naive {
                broken_failures += 1;
            }
        }
    }
    check(
        mismatches == 0 && adversarial >= 500 && broken_failures > 0,
        format!(
            "1500 streams ({adversarial} adversarial), {mismatches} mismatches; \
             without forwarding {broken_failures} adversarial streams differ"
        ),
    )
}

const RECOVERY_VELOCITIES: [(f64, f64); 5] =
    [(5.0, -4.0), (-5.0, 5.0), (-4.0, -5.0), (4.5, 4.5), (-3.0, 5.0)];
const SCENE_BATCH: usize = 20_000;

struct Scene {
    label: String,
    truth: Velocity,
    /// Second batch of the scene, restricted to a 64x64 ROI centred on
    /// the object.
    batch: EventBatch,
    /// Raw events of that batch and the ROI, for the independent oracle.
    raw: Vec<Event>,
    roi: Roi,
}

fn recovery_scenes() -> Vec<Scene> {
    let mut scenes = Vec::new();
    for shape in [Shape::square(), Shape::bar()] {
        for noise in [0.0, 0.1] {
            for (vx, vy) in RECOVERY_VELOCITIES {
                let cfg = SceneConfig {
                    shape,
                    velocity: Velocity::new(vx, vy),
                    batch_size: SCENE_BATCH,
                    batches: 2,
                    event_period_us: 1,
                    start: (120.0, 90.0),
                    noise_fraction: noise,
                    ..SceneConfig::default()
                };
                let SyntheticScene { events, truth } = generate(&cfg).unwrap();
                let raw = events[SCENE_BATCH..2 * SCENE_BATCH].to_vec();
                let (cx, cy) = truth.trajectory[1].center_ref;
                let roi = Roi::new(cx - 32.0, cy - 32.0, 64, 64).unwrap();
                let batch = filter_roi(&make_batch(raw.clone()).unwrap(), &roi);
                scenes.push(Scene {
                    label: format!("{} noise={noise} v=({vx},{vy})", shape.name()),
                    truth: cfg.velocity,
                    batch,
                    raw,
                    roi,
                });
            }
        }
    }
    scenes
}

/// Contrast computed from raw events without the library's batching,
/// warping or voting code.
struct ContrastOracle {
    /// (x, y, normalized dt) in ROI-local pixels.
    points: Vec<(f64, f64, f64)>,
    grid: Vec<f64>,
}

impl ContrastOracle {
    fn new(raw: &[Event], roi: &Roi) -> Self {
        let t0 = raw.first().unwrap().t as f64;
        let t1 = raw.last().unwrap().t as f64;
        let (mid, half) = ((t0 + t1) / 2.0, (t1 - t0) / 2.0);
        let (ox, oy) = (roi.x0.floor(), roi.y0.floor());
        let points = raw
            .iter()
            .filter_map(|e| {
                let (x, y) = (f64::from(e.x) - ox, f64::from(e.y) - oy);
                let inside = x >= 0.0 && y >= 0.0 && x < 64.0 && y < 64.0;
                inside.then(|| (x, y, (e.t as f64 - mid) / half))
            })
            .collect();
        Self {
            points,
            grid: vec![0.0; 64 * 64],
        }
    }

    fn contrast(&mut self, vx: f64, vy: f64) -> f64 {
        self.grid.iter_mut().for_each(|g| *g = 0.0);
        for &(x, y, dt) in &self.points {
            let (px, py) = (x - dt * vx, y - dt * vy);
            let (fx, fy) = (px.floor(), py.floor());
            let (ax, ay) = (px - fx, py - fy);
            for (ix, iy, w) in [
                (fx, fy, (1.0 - ax) * (1.0 - ay)),
                (fx + 1.0, fy, ax * (1.0 - ay)),
                (fx, fy + 1.0, (1.0 - ax) * ay),
                (fx + 1.0, fy + 1.0, ax * ay),
            ] {
                if (0.0..64.0).contains(&ix) && (0.0..64.0).contains(&iy) {
                    self.grid[iy as usize * 64 + ix as usize] += w;
                }
            }
        }
        let n = self.grid.len() as f64;
        let mean = self.grid.iter().sum::<f64>() / n;
        self.grid.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n
    }

    /// Argmax over a 0.1-step grid, located by a 0.5-step pass over
    /// [-6, 6]^2 and a 0.1-step pass over +-1 around its best point.
    fn grid_search(&mut self) -> (f64, f64) {
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for i in -12..=12 {
            for j in -12..=12 {
                let (vx, vy) = (f64::from(i) * 0.5, f64::from(j) * 0.5);
                let c = self.contrast(vx, vy);
                if c > best.0 {
                    best = (c, vx, vy);
                }
            }
        }
        let (cx, cy) = (best.1, best.2);
        for i in -10..=10 {
            for j in -10..=10 {
                let (vx, vy) = (cx + f64::from(i) * 0.1, cy + f64::from(j) * 0.1);
                let c = self.contrast(vx, vy);
                if c > best.0 {
                    best = (c, vx, vy);
                }
            }
        }
        (best.1, best.2)
    }
}

fn velocity_recovery(scenes: &[Scene]) -> Outcome {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for s in scenes {
        let (v, _) =
            estimate_motion(&s.batch, (64, 64), &OptimizerConfig::default()).map_err(|e| e.to_string())?;
        let tol = |t: f64| (0.05 * t.abs()).max(0.05);
        let ratio =
            ((v.vx - s.truth.vx).abs() / tol(s.truth.vx)).max((v.vy - s.truth.vy).abs() / tol(s.truth.vy));
        worst = worst.max(ratio);
        let (gx, gy) = ContrastOracle::new(&s.raw, &s.roi).grid_search();
        let grid_ok = (v.vx - gx).abs() <= 0.1 + 1e-9 && (v.vy - gy).abs() <= 0.1 + 1e-9;
        if ratio > 1.0 || !grid_ok {
            failures.push(format!(
                "{}: estimate ({:.3},{:.3}) grid ({gx:.1},{gy:.1})",
                s.label, v.vx, v.vy
            ));
        }
    }
    check(
        failures.is_empty(),
        format!(
            "{} scenes, worst error {worst:.2} of tolerance{}{}",
            scenes.len(),
            if failures.is_empty() { "" } else { "; " },
            failures.join("; ")
        ),
    )
}

fn contrast_optimality(scenes: &[Scene]) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut worst_label = String::new();
    for s in scenes {
        let at_truth = contrast_at(&s.batch, (64, 64), s.truth).map_err(|e| e.to_string())?;
        let at_zero = contrast_at(&s.batch, (64, 64), Velocity::ZERO).map_err(|e| e.to_string())?;
        let ratio = at_truth / at_zero;
        if ratio < worst {
            worst = ratio;
            worst_label = s.label.clone();
        }
    }
    check(
        worst >= 2.0,
        format!(
            "{} scenes, smallest ratio {worst:.2} ({worst_label})",
            scenes.len()
        ),
    )
}

fn tracking_sanity() -> Outcome {
    let scene_cfg = SceneConfig {
        shape: Shape::square(),
        velocity: Velocity::new(5.0, -3.5),
        batch_size: SCENE_BATCH,
        batches: 10,
        event_period_us: 1,
        start: (60.0, 130.0),
        ..SceneConfig::default()
    };
    let scene = generate(&scene_cfg).unwrap();
    let (sx, sy) = scene_cfg.start;
    let cfg = TrackerConfig {
        batch_size: SCENE_BATCH,
        roi_init: Roi::new(sx - 32.0, sy - 32.0, 64, 64).unwrap(),
        roi_update_scale: 2.0,
        ..TrackerConfig::default()
    };
    let result = track(&scene.events, &cfg).map_err(|e| e.to_string())?;
    let in_frame = result
        .records
        .iter()
        .all(|r| r.roi.x0 >= 0.0 && r.roi.y0 >= 0.0 && r.roi.x0 + 64.0 <= 240.0 && r.roi.y0 + 64.0 <= 180.0);
    let (ex, ey) = scene.truth.trajectory.last().unwrap().center_end;
    let (rx, ry) = result.final_roi.center();
    let dist = (rx - ex).hypot(ry - ey);
    check(
        result.records.len() == 10 && in_frame && dist <= 2.0,
        format!(
            "{} batches, final ROI centre ({rx:.2},{ry:.2}) vs object ({ex:.2},{ey:.2}): {dist:.2} px, in frame: {in_frame}",
            result.records.len()
        ),
    )
}

fn two_pass_variance(grid: &Array2<f64>) -> f64 {
    let n = grid.len() as f64;
    let mean = grid.iter().sum::<f64>() / n;
    grid.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

fn invariant_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut unity, mut cancel): (f64, f64) = (0.0, 0.0);
    for _ in 0..100_000 {
        let we = WarpedEvent {
            xw: rng.gen_range(-100.0..400.0),
            yw: rng.gen_range(-100.0..400.0),
            norm_dt: rng.gen_range(-1.0..=1.0),
        };
        let st = stencil(&we);
        unity = unity.max((st.iter().map(|s| s.1).sum::<f64>() - 1.0).abs());
        cancel = cancel
            .max(st.iter().map(|s| s.2).sum::<f64>().abs())
            .max(st.iter().map(|s| s.3).sum::<f64>().abs());
    }
    let (mut shift, mut oracle): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let (h, w) = (rng.gen_range(2..80), rng.gen_range(2..80));
        let scale = 10f64.powi(rng.gen_range(-3..4));
        let grid = Array2::from_shape_fn((h, w), |_| rng.gen::<f64>() * scale);
        let (var, _) = contrast(&grid);
        let c = rng.gen_range(-1e3..1e3);
        let (shifted, _) = contrast(&grid.mapv(|v| v + c));
        let reference = two_pass_variance(&grid);
        // Relative to the squared magnitude the sums work at.
        let magnitude = (scale + c.abs()).powi(2);
        shift = shift.max((shifted - var).abs() / magnitude);
        oracle = oracle.max((var - reference).abs() / reference.max(f64::MIN_POSITIVE));
    }
    check(
        unity <= 1e-12 && cancel <= 1e-12 && shift <= 1e-12 && oracle <= 1e-12,
        format!(
            "1e5 events: unity {unity:.1e}, cancellation {cancel:.1e}; \
             1e3 grids: shift {shift:.1e}, oracle {oracle:.1e}"
        ),
    )
}

fn cmax(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_cmax"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn run_pair(dir: &Path, events: &str, tag: &str) -> Result<(), String> {
    let out = dir.join(tag);
    let out = out.to_str().unwrap();
    let common = [
        "--input",
        events,
        "--roi",
        "88,58,64x64",
        "--batch-size",
        "5000",
        "--output-dir",
        out,
    ];
    cmax(&[&["track"], &common[..], &["--roi-update-scale", "2"]].concat())?;
    cmax(&[&["estimate"], &common[..], &["--batch", "1"]].concat())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = dir.path();
    let synth_dir = base.join("scene");
    cmax(&[
        "synth",
        "--start",
        "120,90",
        "--noise",
        "0.05",
        "--output-dir",
        synth_dir.to_str().unwrap(),
    ])?;
    let events = synth_dir.join("events.txt");
    let events = events.to_str().unwrap();
    run_pair(base, events, "a")?;
    run_pair(base, events, "b")?;
    let mut same = true;
    for file in ["trajectory.csv", "trace.csv"] {
        let a = fs::read(base.join("a").join(file)).map_err(|e| e.to_string())?;
        let b = fs::read(base.join("b").join(file)).map_err(|e| e.to_string())?;
        same &= a == b && !a.is_empty();
    }
    check(
        same,
        "trajectory.csv and trace.csv byte-identical across two runs".to_string(),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let scenes = recovery_scenes();
    let criteria: Vec<(&str, Check)> = vec![
        ("cycle-model fidelity", Box::new(cycle_model_fidelity)),
        ("second timing claim", Box::new(second_timing_claim)),
        ("gradient correctness", Box::new(gradient_correctness)),
        ("accumulator equivalence", Box::new(accumulator_equivalence)),
        ("velocity recovery", Box::new(|| velocity_recovery(&scenes))),
        ("contrast optimality", Box::new(|| contrast_optimality(&scenes))),
        ("tracking sanity", Box::new(tracking_sanity)),
        ("invariant suites", Box::new(invariant_suites)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let t = Instant::now();
        let outcome = run();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name:<24} {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name:<24} {detail} [{secs:.1}s]");
            }
        }
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
