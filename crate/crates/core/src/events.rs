//! Event data model, text ingestion, batching and ROI selection.
//!
//! Timestamps are kept as integer microseconds. A batch carries its reference
//! time (the midpoint of its time span) and the per-event time offsets scaled
//! to `[-1, 1]`, so velocities throughout the crate are expressed in pixels
//! per half batch duration.

use std::io::BufRead;

use crate::error::{Error, Result};

/// Sign of the brightness change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Off,
    On,
}

impl Polarity {
    pub fn sign(self) -> i8 {
        match self {
            Polarity::Off => -1,
            Polarity::On => 1,
        }
    }

    /// Maps dataset encodings: `0` and `-1` are decreases, `1` is an increase.
    pub fn from_raw(raw: i64) -> Option<Self> {
        match raw {
            0 | -1 => Some(Polarity::Off),
            1 => Some(Polarity::On),
            _ => None,
        }
    }
}

/// A single camera event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    /// Timestamp in microseconds.
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub polarity: Polarity,
}

impl Event {
    pub fn new(t: u64, x: u16, y: u16, polarity: Polarity) -> Self {
        Self { t, x, y, polarity }
    }
}

/// Sensor resolution in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SensorGeometry {
    pub width: u32,
    pub height: u32,
}

impl SensorGeometry {
    pub const DAVIS_240C: SensorGeometry = SensorGeometry {
        width: 240,
        height: 180,
    };

    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn contains(&self, x: u64, y: u64) -> bool {
        x < u64::from(self.width) && y < u64::from(self.height)
    }
}

impl Default for SensorGeometry {
    fn default() -> Self {
        Self::DAVIS_240C
    }
}

/// Parses whitespace-separated `t x y p` lines.
///
/// A timestamp containing a decimal point is read as seconds and rounded to
/// microseconds; otherwise it is taken as integer microseconds. Blank lines
/// and lines starting with `#` are skipped.
pub fn parse_events<R: BufRead>(source: R, sensor: SensorGeometry) -> Result<Vec<Event>> {
    let mut events = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let event = parse_line(trimmed, lineno)?;
        let (x, y) = (u64::from(event.1), u64::from(event.2));
        if !sensor.contains(x, y) {
            return Err(Error::OutOfRange {
                line: lineno,
                x,
                y,
                width: sensor.width,
                height: sensor.height,
            });
        }
        events.push(Event::new(event.0, event.1 as u16, event.2 as u16, event.3));
    }
    Ok(events)
}

fn parse_line(line: &str, lineno: usize) -> Result<(u64, u32, u32, Polarity)> {
    let err = |message: String| Error::Parse {
        line: lineno,
        message,
    };
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(err(format!(
            "expected 4 fields `t x y p`, found {}",
            fields.len()
        )));
    }
    let t = parse_timestamp(fields[0]).ok_or_else(|| err(format!("bad timestamp `{}`", fields[0])))?;
    let x: u32 = fields[1]
        .parse()
        .map_err(|_| err(format!("bad x coordinate `{}`", fields[1])))?;
    let y: u32 = fields[2]
        .parse()
        .map_err(|_| err(format!("bad y coordinate `{}`", fields[2])))?;
    let polarity = fields[3]
        .parse::<i64>()
        .ok()
        .and_then(Polarity::from_raw)
        .ok_or_else(|| err(format!("bad polarity `{}`", fields[3])))?;
    Ok((t, x, y, polarity))
}

fn parse_timestamp(field: &str) -> Option<u64> {
    if field.contains('.') {
        let seconds: f64 = field.parse().ok()?;
        if !seconds.is_finite() || seconds < 0.0 {
            return None;
        }
        Some((seconds * 1e6).round() as u64)
    } else {
        field.parse().ok()
    }
}

/// Region of interest. The origin is real-valued so the tracker can move it
/// by sub-pixel amounts; selection floors it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Roi {
    pub x0: f64,
    pub y0: f64,
    pub width: u32,
    pub height: u32,
}

impl Roi {
    pub fn new(x0: f64, y0: f64, width: u32, height: u32) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::Config(format!(
                "ROI must be at least 2x2, got {width}x{height}"
            )));
        }
        if !x0.is_finite() || !y0.is_finite() {
            return Err(Error::Config("ROI origin must be finite".into()));
        }
        Ok(Self {
            x0,
            y0,
            width,
            height,
        })
    }

    /// Integer pixel origin used for selection and local addressing.
    pub fn pixel_origin(&self) -> (i64, i64) {
        (self.x0.floor() as i64, self.y0.floor() as i64)
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.x0 + f64::from(self.width) / 2.0,
            self.y0 + f64::from(self.height) / 2.0,
        )
    }

    pub fn contains(&self, x: u16, y: u16) -> bool {
        let (ox, oy) = self.pixel_origin();
        let (x, y) = (i64::from(x), i64::from(y));
        x >= ox && x < ox + i64::from(self.width) && y >= oy && y < oy + i64::from(self.height)
    }
}

/// A batch of time-ordered events with its reference time and normalized
/// time offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct EventBatch {
    events: Vec<Event>,
    norm_dts: Vec<f64>,
    t_ref: f64,
    half_span: f64,
    origin: (i64, i64),
}

impl EventBatch {
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn norm_dts(&self) -> &[f64] {
        &self.norm_dts
    }

    /// Reference time in microseconds (batch midpoint).
    pub fn t_ref(&self) -> f64 {
        self.t_ref
    }

    /// Half the time span of the batch in microseconds; one normalized time
    /// unit.
    pub fn half_span(&self) -> f64 {
        self.half_span
    }

    /// Pixel origin of the frame that local coordinates are relative to.
    /// `(0, 0)` until the batch is filtered by an ROI.
    pub fn origin(&self) -> (i64, i64) {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Event coordinates relative to [`EventBatch::origin`].
    pub fn local_coords(&self) -> impl ExactSizeIterator<Item = (f64, f64)> + '_ {
        let (ox, oy) = self.origin;
        self.events
            .iter()
            .map(move |e| ((i64::from(e.x) - ox) as f64, (i64::from(e.y) - oy) as f64))
    }
}

/// Builds a batch: reference time at the midpoint of the time span and
/// offsets scaled by half the span. A zero-length span yields all-zero
/// offsets.
pub fn make_batch(events: Vec<Event>) -> Result<EventBatch> {
    let (first, last) = match (events.first(), events.last()) {
        (Some(f), Some(l)) => (f.t, l.t),
        _ => return Err(Error::EmptyBatch),
    };
    check_sorted(&events)?;
    let span = (last - first) as f64;
    let half_span = span / 2.0;
    let t_ref = first as f64 + half_span;
    let norm_dts = if half_span > 0.0 {
        events.iter().map(|e| (e.t as f64 - t_ref) / half_span).collect()
    } else {
        vec![0.0; events.len()]
    };
    Ok(EventBatch {
        events,
        norm_dts,
        t_ref,
        half_span,
        origin: (0, 0),
    })
}

pub(crate) fn check_sorted(events: &[Event]) -> Result<()> {
    match events.windows(2).position(|w| w[1].t < w[0].t) {
        Some(i) => Err(Error::Unsorted {
            index: i + 1,
            previous: events[i].t,
            current: events[i + 1].t,
        }),
        None => Ok(()),
    }
}

/// Keeps the events inside `roi` and re-bases local coordinates on its
/// floored origin. The reference time and normalization of the full batch
/// are retained.
pub fn filter_roi(batch: &EventBatch, roi: &Roi) -> EventBatch {
    let (events, norm_dts): (Vec<Event>, Vec<f64>) = batch
        .events
        .iter()
        .zip(&batch.norm_dts)
        .filter(|(e, _)| roi.contains(e.x, e.y))
        .map(|(e, dt)| (*e, *dt))
        .unzip();
    EventBatch {
        events,
        norm_dts,
        t_ref: batch.t_ref,
        half_span: batch.half_span,
        origin: roi.pixel_origin(),
    }
}
