//! `cmax`: contrast maximization motion estimation and ROI tracking on
//! text event files.

mod config;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cmax_core::cyclemodel::{reference_timings, CycleParams};
use cmax_core::synth::{generate, write_events, SceneConfig, Shape};
use cmax_core::{
    estimate_motion, filter_roi, make_batch, parse_events, speedup_report, track, AccumulatorMode, Event,
    SensorGeometry, Velocity,
};

use crate::config::{parse_dims, parse_pair, RunConfig};

#[derive(Parser)]
#[command(
    name = "cmax",
    version,
    about = "Contrast maximization motion estimation for event cameras"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track a region of interest through an event file.
    Track(RunArgs),
    /// Estimate the velocity of a single batch and write the optimizer trace.
    Estimate {
        #[command(flatten)]
        run: RunArgs,
        /// Zero-based index of the batch to process.
        #[arg(long, default_value_t = 0)]
        batch: usize,
    },
    /// Print the cycle count and projected time of one batch.
    Cycles(CycleArgs),
    /// Generate a synthetic scene with ground truth.
    Synth(SynthArgs),
}

/// Run settings. Values from `--config` are applied first; flags win.
#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Event file with one `t x y p` line per event.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Sensor size as WxH.
    #[arg(long)]
    sensor: Option<String>,
    /// Initial ROI as x0,y0,WxH, e.g. `48,56,64x64`.
    #[arg(long)]
    roi: Option<String>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Fixed step size, or `auto` for the event-count based default.
    #[arg(long)]
    learning_rate: Option<String>,
    /// Initial velocity as vx,vy.
    #[arg(long, allow_hyphen_values = true)]
    v_init: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    roi_update_scale: Option<f64>,
    #[arg(long)]
    min_roi_events: Option<usize>,
    #[arg(long)]
    accumulator: Option<AccumulatorMode>,
    /// Write the final IWE of every batch as `iwe_NNNN.pgm`.
    #[arg(long)]
    dump_iwe: bool,
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.input {
            cfg.input = Some(p.clone());
        }
        if let Some(p) = &self.output_dir {
            cfg.output_dir = p.clone();
        }
        if let Some(s) = &self.sensor {
            (cfg.sensor_width, cfg.sensor_height) = parse_dims(s).context("--sensor")?;
        }
        if let Some(r) = &self.roi {
            let mut parts = r.splitn(3, ',');
            let (Some(x0), Some(y0), Some(dims)) = (parts.next(), parts.next(), parts.next()) else {
                bail!("--roi: expected `x0,y0,WxH`, got `{r}`");
            };
            cfg.set("roi_x0", x0.trim())?;
            cfg.set("roi_y0", y0.trim())?;
            (cfg.roi_width, cfg.roi_height) = parse_dims(dims).context("--roi")?;
        }
        if let Some(n) = self.batch_size {
            cfg.batch_size = n;
        }
        if let Some(n) = self.iterations {
            cfg.iterations = n;
        }
        if let Some(lr) = &self.learning_rate {
            cfg.set("learning_rate", lr).context("--learning-rate")?;
        }
        if let Some(v) = &self.v_init {
            cfg.set("v_init", v).context("--v-init")?;
        }
        if let Some(s) = self.roi_update_scale {
            cfg.roi_update_scale = s;
        }
        if let Some(n) = self.min_roi_events {
            cfg.min_roi_events = n;
        }
        if let Some(m) = self.accumulator {
            cfg.accumulator = m;
        }
        if self.dump_iwe {
            cfg.dump_iwe = true;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct CycleArgs {
    /// Events in the batch (N).
    #[arg(long, default_value_t = 5000)]
    n_events: u64,
    /// Optimization iterations (T).
    #[arg(long, default_value_t = 100)]
    iters: u64,
    /// Events inside the ROI (n).
    #[arg(long, default_value_t = 800)]
    roi_events: u64,
    /// ROI size as WxH.
    #[arg(long, default_value = "64x64")]
    roi: String,
    #[arg(long, default_value_t = 32)]
    readout_latency: u64,
    #[arg(long, default_value_t = 35)]
    voting_latency: u64,
    /// Clock frequency in Hz.
    #[arg(long, default_value_t = 210e6)]
    clock: f64,
    /// Extra `label=seconds` rows to compare; replaces the CPU/GPU reference rows.
    #[arg(long = "measured")]
    measured: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = "square")]
    scene: Shape,
    /// True velocity in pixels per normalized time unit, as vx,vy.
    #[arg(long, default_value = "3,-2", allow_hyphen_values = true)]
    velocity: String,
    #[arg(long, default_value_t = 10)]
    batches: usize,
    #[arg(long, default_value_t = 5000)]
    batch_size: usize,
    #[arg(long, default_value_t = 2)]
    event_period_us: u64,
    /// Object center at t = 0, as x,y.
    #[arg(long, default_value = "80,120")]
    start: String,
    /// Fraction of events replaced by uniform noise.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Edge spread in pixels.
    #[arg(long, default_value_t = 1.0)]
    edge_sigma: f64,
    #[arg(long, default_value = "240x180")]
    sensor: String,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
    /// Base name of the written `<name>.txt` and `<name>.truth` files.
    #[arg(long, default_value = "events")]
    name: String,
}

fn read_events(path: &Path, sensor: SensorGeometry) -> Result<Vec<Event>> {
    let file = File::open(path).with_context(|| format!("cannot open input {}", path.display()))?;
    parse_events(BufReader::new(file), sensor).with_context(|| format!("while reading {}", path.display()))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn prepare_output(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("cannot create output directory {}", cfg.output_dir.display()))?;
    let mut out = create(&cfg.output_dir, "config.txt")?;
    write!(out, "{cfg}")?;
    out.flush()?;
    Ok(())
}

fn cmd_track(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let tracker = cfg.tracker()?;
    let events = read_events(cfg.input()?, cfg.sensor())?;
    prepare_output(&cfg)?;

    let result = track(&events, &tracker)?;
    let mut out = create(&cfg.output_dir, "trajectory.csv")?;
    result.write_csv(&mut out)?;
    out.flush()?;

    for r in &result.records {
        if let Some(images) = &r.iwe {
            let mut out = create(&cfg.output_dir, &format!("iwe_{:04}.pgm", r.batch))?;
            cmax_core::pgm::write_pgm16(&images.iwe, &mut out)?;
            out.flush()?;
        }
    }

    let batches = result.records.len();
    let mean = |f: &dyn Fn(&cmax_core::tracker::BatchRecord) -> f64| {
        if batches == 0 {
            0.0
        } else {
            result.records.iter().map(f).sum::<f64>() / batches as f64
        }
    };
    let skipped = result.records.iter().filter(|r| r.skipped).count();
    println!("batches:             {batches} ({skipped} skipped)");
    println!("mean contrast:       {:.6}", mean(&|r| r.contrast));
    println!("mean events in ROI:  {:.1}", mean(&|r| r.events_in_roi as f64));
    println!(
        "final ROI:           ({:.3}, {:.3}) {}x{}",
        result.final_roi.x0, result.final_roi.y0, result.final_roi.width, result.final_roi.height
    );
    println!(
        "output:              {}",
        cfg.output_dir.join("trajectory.csv").display()
    );
    Ok(())
}

fn cmd_estimate(args: &RunArgs, batch_index: usize) -> Result<()> {
    let cfg = args.resolve()?;
    let roi = cfg.roi()?;
    let optimizer = cfg.optimizer();
    if cfg.batch_size == 0 {
        bail!("batch size must be at least 1");
    }
    let events = read_events(cfg.input()?, cfg.sensor())?;
    let batches = events.len().div_ceil(cfg.batch_size);
    let Some(chunk) = events.chunks(cfg.batch_size).nth(batch_index) else {
        bail!("batch {batch_index} requested but the input holds {batches} batches");
    };
    prepare_output(&cfg)?;

    let selected = filter_roi(&make_batch(chunk.to_vec())?, &roi);
    if selected.is_empty() {
        bail!("no events of batch {batch_index} fall inside the ROI");
    }
    let (v, trace) = estimate_motion(&selected, (roi.width as usize, roi.height as usize), &optimizer)?;
    let mut out = create(&cfg.output_dir, "trace.csv")?;
    trace.write_csv(&mut out)?;
    out.flush()?;

    println!("events in ROI:  {}", selected.len());
    println!("iterations:     {}", trace.records.len());
    println!("velocity:       ({:.6}, {:.6})", v.vx, v.vy);
    println!("contrast:       {:.6}", trace.final_contrast);
    println!("output:         {}", cfg.output_dir.join("trace.csv").display());
    Ok(())
}

fn cmd_cycles(args: &CycleArgs) -> Result<()> {
    let (w, h) = parse_dims(&args.roi).context("--roi")?;
    let params = CycleParams {
        total_events: args.n_events,
        iterations: args.iters,
        roi_events: args.roi_events,
        roi_pixels: u64::from(w) * u64::from(h),
        readout_latency: args.readout_latency,
        voting_latency: args.voting_latency,
        clock_hz: args.clock,
    };
    let measured = if args.measured.is_empty() {
        reference_timings()
    } else {
        args.measured
            .iter()
            .map(|m| {
                let (label, secs) = m
                    .split_once('=')
                    .with_context(|| format!("--measured: expected `label=seconds`, got `{m}`"))?;
                let secs: f64 = secs
                    .parse()
                    .with_context(|| format!("--measured: bad time in `{m}`"))?;
                Ok((label.to_string(), secs))
            })
            .collect::<Result<_>>()?
    };
    let report = speedup_report(&params, &measured)?;
    match args.format {
        Format::Text => print!("{report}"),
        Format::Csv => print!("{}", report.to_csv()),
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let (vx, vy) = parse_pair(&args.velocity).context("--velocity")?;
    let (sensor_w, sensor_h) = parse_dims(&args.sensor).context("--sensor")?;
    let cfg = SceneConfig {
        shape: args.scene,
        velocity: Velocity::new(vx, vy),
        batch_size: args.batch_size,
        batches: args.batches,
        event_period_us: args.event_period_us,
        start: parse_pair(&args.start).context("--start")?,
        noise_fraction: args.noise,
        edge_sigma: args.edge_sigma,
        sensor: SensorGeometry::new(sensor_w, sensor_h),
        seed: args.seed,
    };
    let scene = generate(&cfg)?;
    fs::create_dir_all(&args.output_dir)
        .with_context(|| format!("cannot create output directory {}", args.output_dir.display()))?;

    let events_name = format!("{}.txt", args.name);
    let mut out = create(&args.output_dir, &events_name)?;
    write_events(&scene.events, &mut out)?;
    out.flush()?;
    let mut out = create(&args.output_dir, &format!("{}.truth", args.name))?;
    scene.truth.write(&mut out)?;
    out.flush()?;

    let noisy = scene.truth.noise.iter().filter(|&&n| n).count();
    println!("events:  {} ({} noise)", scene.events.len(), noisy);
    println!("output:  {}", args.output_dir.join(events_name).display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Track(args) => cmd_track(args),
        Command::Estimate { run, batch } => cmd_estimate(run, *batch),
        Command::Cycles(args) => cmd_cycles(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
