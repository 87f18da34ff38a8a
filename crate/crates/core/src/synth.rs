//! Seeded synthetic event scenes with known motion.
//!
//! An object (square outline, bar outline or point cloud) translates at a
//! constant velocity. One event is emitted every `event_period_us`; each is
//! either a signal event sampled on the object at that instant, or (with
//! probability `noise_fraction`) a uniformly placed noise event. Signal
//! events are spread across their edge by a Gaussian of width `edge_sigma`,
//! standing in for the finite spatial extent of a real intensity edge.
//! Outline edges fire in proportion to their length times the normal
//! component of the velocity, so edges parallel to the motion stay silent
//! as they would on a real sensor. A static outline fires uniformly.
//!
//! Signal positions are quantized by stochastic rounding: a coordinate `p`
//! lands on `floor(p)` with probability `1 - frac(p)` and on `floor(p) + 1`
//! otherwise. Nearest-pixel rounding would make the quantization error a
//! sawtooth function of time, which shifts the contrast peak away from the
//! true velocity.
//!
//! Velocities are given in pixels per normalized time unit for batches of
//! `batch_size` events, i.e. the object moves `2 * velocity` pixels over one
//! batch.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::events::{Event, Polarity, SensorGeometry};
use crate::warp::Velocity;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Outline of an axis-aligned square.
    Square { side: f64 },
    /// Outline of an axis-aligned rectangle, `length` along x.
    Bar { length: f64, thickness: f64 },
    /// `count` fixed points scattered uniformly in a disc.
    Points { count: usize, radius: f64 },
}

impl Shape {
    pub fn name(&self) -> &'static str {
        match self {
            Shape::Square { .. } => "square",
            Shape::Bar { .. } => "bar",
            Shape::Points { .. } => "points",
        }
    }

    pub fn square() -> Self {
        Shape::Square { side: 20.0 }
    }

    pub fn bar() -> Self {
        Shape::Bar {
            length: 28.0,
            thickness: 8.0,
        }
    }

    pub fn points() -> Self {
        Shape::Points {
            count: 40,
            radius: 14.0,
        }
    }
}

impl FromStr for Shape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(Shape::square()),
            "bar" => Ok(Shape::bar()),
            "points" => Ok(Shape::points()),
            other => Err(Error::Config(format!("unknown scene shape `{other}`"))),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub shape: Shape,
    pub velocity: Velocity,
    pub batch_size: usize,
    pub batches: usize,
    pub event_period_us: u64,
    /// Object center at `t = 0`.
    pub start: (f64, f64),
    pub noise_fraction: f64,
    /// Standard deviation in pixels of signal events across the edge they
    /// belong to (isotropic for point clouds).
    pub edge_sigma: f64,
    pub sensor: SensorGeometry,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            shape: Shape::square(),
            velocity: Velocity::new(3.0, -2.0),
            batch_size: 5000,
            batches: 10,
            event_period_us: 2,
            start: (80.0, 120.0),
            noise_fraction: 0.0,
            edge_sigma: 1.0,
            sensor: SensorGeometry::default(),
            seed: 7,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config("batch size must be at least 2".into()));
        }
        if self.event_period_us == 0 {
            return Err(Error::Config("event period must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.noise_fraction) {
            return Err(Error::Config("noise fraction must lie in [0, 1]".into()));
        }
        if !(self.edge_sigma >= 0.0 && self.edge_sigma.is_finite()) {
            return Err(Error::Config("edge sigma must be non-negative".into()));
        }
        if !self.velocity.is_finite() {
            return Err(Error::Config("velocity must be finite".into()));
        }
        Ok(())
    }

    /// Half the duration of one batch in microseconds.
    pub fn half_span_us(&self) -> f64 {
        (self.batch_size - 1) as f64 * self.event_period_us as f64 / 2.0
    }

    /// Object velocity in pixels per microsecond.
    pub fn velocity_px_per_us(&self) -> (f64, f64) {
        let h = self.half_span_us();
        (self.velocity.vx / h, self.velocity.vy / h)
    }

    pub fn center_at(&self, t_us: f64) -> (f64, f64) {
        let (ux, uy) = self.velocity_px_per_us();
        (self.start.0 + ux * t_us, self.start.1 + uy * t_us)
    }

    /// Time of the middle of batch `b`, which is also its reference time.
    pub fn batch_mid_us(&self, b: usize) -> f64 {
        let first = (b * self.batch_size) as f64 * self.event_period_us as f64;
        first + self.half_span_us()
    }

    pub fn batch_end_us(&self, b: usize) -> f64 {
        ((b + 1) * self.batch_size - 1) as f64 * self.event_period_us as f64
    }
}

/// Object position at one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub batch: usize,
    pub t_ref_us: f64,
    pub center_ref: (f64, f64),
    pub t_end_us: f64,
    pub center_end: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub shape: String,
    pub velocity: Velocity,
    pub velocity_px_per_us: (f64, f64),
    pub batch_size: usize,
    pub event_period_us: u64,
    pub noise_fraction: f64,
    pub edge_sigma: f64,
    pub seed: u64,
    pub trajectory: Vec<TrajectoryPoint>,
    /// One flag per emitted event, `true` for noise.
    pub noise: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub events: Vec<Event>,
    pub truth: GroundTruth,
}

struct Sampler {
    shape: Shape,
    points: Vec<(f64, f64)>,
    /// Cumulative selection weights of the four outline edges.
    edge_cdf: [f64; 4],
}

/// Start offset, direction, length and outward normal of one outline edge.
type Edge = ((f64, f64), (f64, f64), f64, (f64, f64));

/// Outline edges walking bottom, right, top, left.
fn rect_edges(w: f64, h: f64) -> [Edge; 4] {
    let (hw, hh) = (w / 2.0, h / 2.0);
    [
        ((-hw, -hh), (1.0, 0.0), w, (0.0, -1.0)),
        ((hw, -hh), (0.0, 1.0), h, (1.0, 0.0)),
        ((hw, hh), (-1.0, 0.0), w, (0.0, 1.0)),
        ((-hw, hh), (0.0, -1.0), h, (-1.0, 0.0)),
    ]
}

fn outline_size(shape: Shape) -> (f64, f64) {
    match shape {
        Shape::Square { side } => (side, side),
        Shape::Bar { length, thickness } => (length, thickness),
        Shape::Points { .. } => (0.0, 0.0),
    }
}

impl Sampler {
    fn new(shape: Shape, velocity: Velocity, rng: &mut ChaCha8Rng) -> Self {
        let points = match shape {
            Shape::Points { count, radius } => (0..count)
                .map(|_| {
                    let r = radius * rng.gen::<f64>().sqrt();
                    let a = rng.gen::<f64>() * std::f64::consts::TAU;
                    (r * a.cos(), r * a.sin())
                })
                .collect(),
            _ => Vec::new(),
        };
        let (w, h) = outline_size(shape);
        let edges = rect_edges(w, h);
        let mut weights =
            edges.map(|(_, _, len, (nx, ny))| len * (nx * velocity.vx + ny * velocity.vy).abs());
        if weights.iter().sum::<f64>() == 0.0 {
            weights = edges.map(|(_, _, len, _)| len);
        }
        let mut edge_cdf = [0.0; 4];
        let mut acc = 0.0;
        for (c, w) in edge_cdf.iter_mut().zip(weights) {
            acc += w;
            *c = acc;
        }
        Self {
            shape,
            points,
            edge_cdf,
        }
    }

    /// Offset from the object center and the outward normal of the edge it
    /// was sampled on (zero for point clouds).
    fn sample(&self, rng: &mut ChaCha8Rng) -> ((f64, f64), (f64, f64)) {
        if let Shape::Points { .. } = self.shape {
            return (self.points[rng.gen_range(0..self.points.len())], (0.0, 0.0));
        }
        let (w, h) = outline_size(self.shape);
        let u = rng.gen::<f64>() * self.edge_cdf[3];
        let k = self.edge_cdf.iter().position(|&c| u < c).unwrap_or(3);
        let ((sx, sy), (dx, dy), len, normal) = rect_edges(w, h)[k];
        let a = rng.gen::<f64>() * len;
        ((sx + a * dx, sy + a * dy), normal)
    }
}

/// Generates the scene described by `cfg`. Identical configs produce
/// identical scenes.
pub fn generate(cfg: &SceneConfig) -> Result<SyntheticScene> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sampler = Sampler::new(cfg.shape, cfg.velocity, &mut rng);
    let total = cfg.batch_size * cfg.batches;
    let (w, h) = (cfg.sensor.width, cfg.sensor.height);

    let mut events = Vec::with_capacity(total);
    let mut noise = Vec::with_capacity(total);
    for k in 0..total {
        let t = k as u64 * cfg.event_period_us;
        if rng.gen::<f64>() < cfg.noise_fraction {
            let x = rng.gen_range(0..w) as u16;
            let y = rng.gen_range(0..h) as u16;
            let p = if rng.gen::<bool>() {
                Polarity::On
            } else {
                Polarity::Off
            };
            events.push(Event::new(t, x, y, p));
            noise.push(true);
            continue;
        }
        let (c_x, c_y) = cfg.center_at(t as f64);
        let ((mut ox, mut oy), (nx, ny)) = sampler.sample(&mut rng);
        if cfg.edge_sigma > 0.0 {
            let spread = Normal::new(0.0, cfg.edge_sigma).expect("validated sigma");
            if nx == 0.0 && ny == 0.0 {
                ox += spread.sample(&mut rng);
                oy += spread.sample(&mut rng);
            } else {
                let d = spread.sample(&mut rng);
                ox += d * nx;
                oy += d * ny;
            }
        }
        let px = (c_x + ox + rng.gen::<f64>()).floor();
        let py = (c_y + oy + rng.gen::<f64>()).floor();
        if px < 0.0 || py < 0.0 || px >= f64::from(w) || py >= f64::from(h) {
            continue;
        }
        let facing = nx * cfg.velocity.vx + ny * cfg.velocity.vy;
        let p = if facing > 0.0 || (facing == 0.0 && rng.gen::<bool>()) {
            Polarity::On
        } else {
            Polarity::Off
        };
        events.push(Event::new(t, px as u16, py as u16, p));
        noise.push(false);
    }

    let trajectory = (0..cfg.batches)
        .map(|b| {
            let t_ref_us = cfg.batch_mid_us(b);
            let t_end_us = cfg.batch_end_us(b);
            TrajectoryPoint {
                batch: b,
                t_ref_us,
                center_ref: cfg.center_at(t_ref_us),
                t_end_us,
                center_end: cfg.center_at(t_end_us),
            }
        })
        .collect();

    Ok(SyntheticScene {
        events,
        truth: GroundTruth {
            shape: cfg.shape.name().to_string(),
            velocity: cfg.velocity,
            velocity_px_per_us: cfg.velocity_px_per_us(),
            batch_size: cfg.batch_size,
            event_period_us: cfg.event_period_us,
            noise_fraction: cfg.noise_fraction,
            edge_sigma: cfg.edge_sigma,
            seed: cfg.seed,
            trajectory,
            noise,
        },
    })
}

/// Writes events as `t x y p` lines, `t` in microseconds and `p` in `{0, 1}`.
pub fn write_events<W: Write>(events: &[Event], mut out: W) -> io::Result<()> {
    writeln!(out, "# t_us x y p")?;
    for e in events {
        let p = match e.polarity {
            Polarity::On => 1,
            Polarity::Off => 0,
        };
        writeln!(out, "{} {} {} {}", e.t, e.x, e.y, p)?;
    }
    Ok(())
}

impl GroundTruth {
    /// Sidecar format: `key = value` lines, then a `[trajectory]` CSV section
    /// and a `[tags]` section with one `signal` / `noise` line per event.
    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# synthetic scene ground truth")?;
        writeln!(out, "shape = {}", self.shape)?;
        writeln!(out, "velocity = {} {}", self.velocity.vx, self.velocity.vy)?;
        writeln!(
            out,
            "velocity_px_per_us = {} {}",
            self.velocity_px_per_us.0, self.velocity_px_per_us.1
        )?;
        writeln!(out, "batch_size = {}", self.batch_size)?;
        writeln!(out, "event_period_us = {}", self.event_period_us)?;
        writeln!(out, "noise_fraction = {}", self.noise_fraction)?;
        writeln!(out, "edge_sigma = {}", self.edge_sigma)?;
        writeln!(out, "seed = {}", self.seed)?;
        writeln!(out, "[trajectory]")?;
        writeln!(
            out,
            "batch,t_ref_us,center_x_ref,center_y_ref,t_end_us,center_x_end,center_y_end"
        )?;
        for p in &self.trajectory {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p.batch,
                p.t_ref_us,
                p.center_ref.0,
                p.center_ref.1,
                p.t_end_us,
                p.center_end.0,
                p.center_end.1
            )?;
        }
        writeln!(out, "[tags]")?;
        for &n in &self.noise {
            writeln!(out, "{}", if n { "noise" } else { "signal" })?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut truth = GroundTruth {
            shape: String::new(),
            velocity: Velocity::ZERO,
            velocity_px_per_us: (0.0, 0.0),
            batch_size: 0,
            event_period_us: 0,
            noise_fraction: 0.0,
            edge_sigma: 0.0,
            seed: 0,
            trajectory: Vec::new(),
            noise: Vec::new(),
        };
        #[derive(PartialEq)]
        enum Section {
            Header,
            Trajectory,
            Tags,
        }
        let mut section = Section::Header;
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let bad = |what: &str| Error::Parse {
                line: lineno,
                message: format!("bad {what}"),
            };
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "[trajectory]" => {
                    section = Section::Trajectory;
                    continue;
                }
                "[tags]" => {
                    section = Section::Tags;
                    continue;
                }
                _ => {}
            }
            match section {
                Section::Header => {
                    let (key, value) = line.split_once('=').ok_or_else(|| bad("key = value line"))?;
                    let value = value.trim();
                    let pair = |what: &str| -> Result<(f64, f64)> {
                        let mut it = value.split_whitespace().map(str::parse::<f64>);
                        match (it.next(), it.next()) {
                            (Some(Ok(a)), Some(Ok(b))) => Ok((a, b)),
                            _ => Err(bad(what)),
                        }
                    };
                    match key.trim() {
                        "shape" => truth.shape = value.to_string(),
                        "velocity" => {
                            let (a, b) = pair("velocity")?;
                            truth.velocity = Velocity::new(a, b);
                        }
                        "velocity_px_per_us" => truth.velocity_px_per_us = pair("velocity")?,
                        "batch_size" => truth.batch_size = value.parse().map_err(|_| bad("batch_size"))?,
                        "event_period_us" => {
                            truth.event_period_us = value.parse().map_err(|_| bad("event_period_us"))?
                        }
                        "noise_fraction" => {
                            truth.noise_fraction = value.parse().map_err(|_| bad("noise_fraction"))?
                        }
                        "edge_sigma" => truth.edge_sigma = value.parse().map_err(|_| bad("edge_sigma"))?,
                        "seed" => truth.seed = value.parse().map_err(|_| bad("seed"))?,
                        _ => return Err(bad("key")),
                    }
                }
                Section::Trajectory => {
                    if line.starts_with("batch") {
                        continue;
                    }
                    let f: Vec<f64> = line
                        .split(',')
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad("trajectory row"))?;
                    if f.len() != 7 {
                        return Err(bad("trajectory row"));
                    }
                    truth.trajectory.push(TrajectoryPoint {
                        batch: f[0] as usize,
                        t_ref_us: f[1],
                        center_ref: (f[2], f[3]),
                        t_end_us: f[4],
                        center_end: (f[5], f[6]),
                    });
                }
                Section::Tags => match line {
                    "noise" => truth.noise.push(true),
                    "signal" => truth.noise.push(false),
                    _ => return Err(bad("tag")),
                },
            }
        }
        Ok(truth)
    }
}
