//! ROI tracking loop: batch the stream, select the ROI, estimate motion,
//! move the ROI.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::events::{check_sorted, filter_roi, make_batch, Event, EventBatch, Roi, SensorGeometry};
use crate::optimizer::{contrast_at, estimate_motion, OptimizerConfig};
use crate::voting::{new_accumulator, AccumulatorStats, ImageSet};
use crate::warp::{warp_batch, Velocity};

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub batch_size: usize,
    pub roi_init: Roi,
    pub optimizer: OptimizerConfig,
    /// Multiplier applied to the estimated velocity when moving the ROI.
    pub roi_update_scale: f64,
    pub min_roi_events: usize,
    pub sensor: SensorGeometry,
    /// Keep each batch's final IWE in the result.
    pub keep_iwe: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            batch_size: 5000,
            roi_init: Roi {
                x0: 0.0,
                y0: 0.0,
                width: 64,
                height: 64,
            },
            optimizer: OptimizerConfig::default(),
            roi_update_scale: 1.0,
            min_roi_events: 10,
            sensor: SensorGeometry::default(),
            keep_iwe: false,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !self.roi_update_scale.is_finite() {
            return Err(Error::Config("ROI update scale must be finite".into()));
        }
        if self.roi_init.width > self.sensor.width || self.roi_init.height > self.sensor.height {
            return Err(Error::Config(format!(
                "ROI {}x{} does not fit the {}x{} sensor",
                self.roi_init.width, self.roi_init.height, self.sensor.width, self.sensor.height
            )));
        }
        self.optimizer.validate()
    }
}

/// Moves the ROI origin by `scale * v`, clamped so the ROI stays on the
/// sensor.
pub fn update_roi(roi: &Roi, v: Velocity, scale: f64, sensor: SensorGeometry) -> Roi {
    let max_x = f64::from(sensor.width.saturating_sub(roi.width));
    let max_y = f64::from(sensor.height.saturating_sub(roi.height));
    Roi {
        x0: (roi.x0 + scale * v.vx).clamp(0.0, max_x),
        y0: (roi.y0 + scale * v.vy).clamp(0.0, max_y),
        ..*roi
    }
}

/// Outcome of one batch. `roi` is the region after the update.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRecord {
    pub batch: usize,
    pub roi: Roi,
    pub velocity: Velocity,
    pub contrast: f64,
    pub events_in_roi: usize,
    /// `true` when too few events fell in the ROI to optimize.
    pub skipped: bool,
    pub stats: AccumulatorStats,
    pub iwe: Option<ImageSet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackResult {
    pub records: Vec<BatchRecord>,
    pub final_roi: Roi,
}

impl TrackResult {
    pub const CSV_HEADER: &'static str = "batch,x_roi,y_roi,vx,vy,contrast,events_in_roi";

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.batch, r.roi.x0, r.roi.y0, r.velocity.vx, r.velocity.vy, r.contrast, r.events_in_roi
            )?;
        }
        Ok(())
    }
}

fn final_iwe(batch: &EventBatch, roi: &Roi, v: Velocity) -> Result<ImageSet> {
    let mut acc = new_accumulator(
        crate::voting::AccumulatorMode::Naive,
        roi.width as usize,
        roi.height as usize,
    )?;
    acc.accumulate(&warp_batch(batch, v));
    Ok(acc.clear_on_read())
}

/// Runs the tracking loop over a time-sorted event stream.
pub fn track(events: &[Event], cfg: &TrackerConfig) -> Result<TrackResult> {
    cfg.validate()?;
    check_sorted(events)?;

    let grid = (cfg.roi_init.width as usize, cfg.roi_init.height as usize);
    let mut roi = cfg.roi_init;
    let mut velocity = cfg.optimizer.v_init;
    let mut records = Vec::new();

    for (index, chunk) in events.chunks(cfg.batch_size).enumerate() {
        if chunk.len() < cfg.batch_size && chunk.len() < cfg.min_roi_events {
            break;
        }
        let batch = make_batch(chunk.to_vec())?;
        let selected = filter_roi(&batch, &roi);
        let events_in_roi = selected.len();

        let (contrast, stats, skipped) = if events_in_roi < cfg.min_roi_events || selected.is_empty() {
            let contrast = contrast_at(&selected, grid, velocity)?;
            (contrast, AccumulatorStats::default(), true)
        } else {
            let opt = OptimizerConfig {
                v_init: velocity,
                ..cfg.optimizer.clone()
            };
            let (v, trace) = estimate_motion(&selected, grid, &opt)?;
            velocity = v;
            (trace.final_contrast, trace.stats, false)
        };

        let iwe = if cfg.keep_iwe {
            Some(final_iwe(&selected, &roi, velocity)?)
        } else {
            None
        };
        roi = update_roi(&roi, velocity, cfg.roi_update_scale, cfg.sensor);
        records.push(BatchRecord {
            batch: index,
            roi,
            velocity,
            contrast,
            events_in_roi,
            skipped,
            stats,
            iwe,
        });
    }

    Ok(TrackResult {
        records,
        final_roi: roi,
    })
}
