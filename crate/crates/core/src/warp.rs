//! Constant-velocity warping of events to the batch reference time.

use std::ops::{Add, Mul, Sub};

use crate::events::EventBatch;

/// Translational velocity in pixels per normalized time unit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Velocity {
    pub vx: f64,
    pub vy: f64,
}

impl Velocity {
    pub const ZERO: Velocity = Velocity { vx: 0.0, vy: 0.0 };

    pub fn new(vx: f64, vy: f64) -> Self {
        Self { vx, vy }
    }

    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite()
    }

    pub fn norm(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

impl Add for Velocity {
    type Output = Velocity;
    fn add(self, rhs: Velocity) -> Velocity {
        Velocity::new(self.vx + rhs.vx, self.vy + rhs.vy)
    }
}

impl Sub for Velocity {
    type Output = Velocity;
    fn sub(self, rhs: Velocity) -> Velocity {
        Velocity::new(self.vx - rhs.vx, self.vy - rhs.vy)
    }
}

impl Mul<f64> for Velocity {
    type Output = Velocity;
    fn mul(self, s: f64) -> Velocity {
        Velocity::new(self.vx * s, self.vy * s)
    }
}

/// An event displaced to the reference time, in ROI-local coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpedEvent {
    pub xw: f64,
    pub yw: f64,
    pub norm_dt: f64,
}

#[inline]
pub fn warp_event(x: f64, y: f64, norm_dt: f64, v: Velocity) -> WarpedEvent {
    WarpedEvent {
        xw: x - norm_dt * v.vx,
        yw: y - norm_dt * v.vy,
        norm_dt,
    }
}

/// Warps every event of `batch` in order. Coordinates are not clamped.
pub fn warp_batch(batch: &EventBatch, v: Velocity) -> Vec<WarpedEvent> {
    let mut out = Vec::with_capacity(batch.len());
    warp_batch_into(batch, v, &mut out);
    out
}

/// Same as [`warp_batch`], reusing `out`'s allocation.
pub fn warp_batch_into(batch: &EventBatch, v: Velocity, out: &mut Vec<WarpedEvent>) {
    out.clear();
    out.extend(
        batch
            .local_coords()
            .zip(batch.norm_dts())
            .map(|((x, y), &dt)| warp_event(x, y, dt, v)),
    );
}
