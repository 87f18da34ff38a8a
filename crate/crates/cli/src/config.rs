//! Flat `key = value` run configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use cmax_core::{AccumulatorMode, OptimizerConfig, Roi, SensorGeometry, TrackerConfig, Velocity};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub sensor_width: u32,
    pub sensor_height: u32,
    pub roi_x0: f64,
    pub roi_y0: f64,
    pub roi_width: u32,
    pub roi_height: u32,
    pub batch_size: usize,
    pub iterations: usize,
    /// `None` selects the event-count based default.
    pub learning_rate: Option<f64>,
    pub v_init: Velocity,
    pub roi_update_scale: f64,
    pub min_roi_events: usize,
    pub accumulator: AccumulatorMode,
    pub output_dir: PathBuf,
    pub dump_iwe: bool,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let tracker = TrackerConfig::default();
        Self {
            input: None,
            sensor_width: tracker.sensor.width,
            sensor_height: tracker.sensor.height,
            roi_x0: tracker.roi_init.x0,
            roi_y0: tracker.roi_init.y0,
            roi_width: tracker.roi_init.width,
            roi_height: tracker.roi_init.height,
            batch_size: tracker.batch_size,
            iterations: tracker.optimizer.iterations,
            learning_rate: tracker.optimizer.learning_rate,
            v_init: tracker.optimizer.v_init,
            roi_update_scale: tracker.roi_update_scale,
            min_roi_events: tracker.min_roi_events,
            accumulator: tracker.optimizer.accumulator_mode,
            output_dir: PathBuf::from("out"),
            dump_iwe: false,
            seed: 7,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| anyhow!("invalid value `{value}` for `{key}`"))
}

pub fn parse_pair(value: &str) -> Result<(f64, f64)> {
    let (a, b) = value
        .split_once(',')
        .ok_or_else(|| anyhow!("expected `a,b`, got `{value}`"))?;
    Ok((parse("pair", a.trim())?, parse("pair", b.trim())?))
}

pub fn parse_dims(value: &str) -> Result<(u32, u32)> {
    let (w, h) = value
        .split_once('x')
        .ok_or_else(|| anyhow!("expected `WxH`, got `{value}`"))?;
    Ok((parse("width", w.trim())?, parse("height", h.trim())?))
}

impl RunConfig {
    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", n + 1))?;
            self.set(key.trim(), value.trim())
                .with_context(|| format!("line {}", n + 1))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "input" => self.input = (!value.is_empty()).then(|| PathBuf::from(value)),
            "sensor_width" => self.sensor_width = parse(key, value)?,
            "sensor_height" => self.sensor_height = parse(key, value)?,
            "roi_x0" => self.roi_x0 = parse(key, value)?,
            "roi_y0" => self.roi_y0 = parse(key, value)?,
            "roi_width" => self.roi_width = parse(key, value)?,
            "roi_height" => self.roi_height = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "iterations" => self.iterations = parse(key, value)?,
            "learning_rate" => {
                self.learning_rate = if value == "auto" {
                    None
                } else {
                    Some(parse(key, value)?)
                }
            }
            "v_init" => {
                let (vx, vy) = parse_pair(value)?;
                self.v_init = Velocity::new(vx, vy);
            }
            "roi_update_scale" => self.roi_update_scale = parse(key, value)?,
            "min_roi_events" => self.min_roi_events = parse(key, value)?,
            "accumulator" => self.accumulator = value.parse()?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "dump_iwe" => self.dump_iwe = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            _ => bail!("unknown key `{key}`"),
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)
            .with_context(|| format!("in config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn sensor(&self) -> SensorGeometry {
        SensorGeometry::new(self.sensor_width, self.sensor_height)
    }

    pub fn roi(&self) -> Result<Roi> {
        Ok(Roi::new(
            self.roi_x0,
            self.roi_y0,
            self.roi_width,
            self.roi_height,
        )?)
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            iterations: self.iterations,
            learning_rate: self.learning_rate,
            v_init: self.v_init,
            accumulator_mode: self.accumulator,
            ..OptimizerConfig::default()
        }
    }

    pub fn tracker(&self) -> Result<TrackerConfig> {
        Ok(TrackerConfig {
            batch_size: self.batch_size,
            roi_init: self.roi()?,
            optimizer: self.optimizer(),
            roi_update_scale: self.roi_update_scale,
            min_roi_events: self.min_roi_events,
            sensor: self.sensor(),
            keep_iwe: self.dump_iwe,
        })
    }

    pub fn input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| anyhow!("no input file given (use --input or `input =` in the config)"))
    }
}

/// Writes every key, so the output parses back to an identical config.
impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let input = self.input.as_deref().map(Path::display);
        writeln!(f, "input = {}", input.map(|p| p.to_string()).unwrap_or_default())?;
        writeln!(f, "sensor_width = {}", self.sensor_width)?;
        writeln!(f, "sensor_height = {}", self.sensor_height)?;
        writeln!(f, "roi_x0 = {}", self.roi_x0)?;
        writeln!(f, "roi_y0 = {}", self.roi_y0)?;
        writeln!(f, "roi_width = {}", self.roi_width)?;
        writeln!(f, "roi_height = {}", self.roi_height)?;
        writeln!(f, "batch_size = {}", self.batch_size)?;
        writeln!(f, "iterations = {}", self.iterations)?;
        match self.learning_rate {
            Some(lr) => writeln!(f, "learning_rate = {lr}")?,
            None => writeln!(f, "learning_rate = auto")?,
        }
        writeln!(f, "v_init = {},{}", self.v_init.vx, self.v_init.vy)?;
        writeln!(f, "roi_update_scale = {}", self.roi_update_scale)?;
        writeln!(f, "min_roi_events = {}", self.min_roi_events)?;
        writeln!(f, "accumulator = {}", self.accumulator)?;
        writeln!(f, "output_dir = {}", self.output_dir.display())?;
        writeln!(f, "dump_iwe = {}", self.dump_iwe)?;
        writeln!(f, "seed = {}", self.seed)
    }
}
