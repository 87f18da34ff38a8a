//! Closed-form cycle count of the hardware pipeline and wall-clock
//! projections derived from it.
//!
//! One batch costs `N + T * (n + L_r + P / 4 + L_v)` cycles: `N` cycles to
//! preprocess every event once, then per iteration `n` cycles to vote the
//! ROI events, `P / 4` cycles to read the four parity banks back in
//! parallel, plus the readout and voting pipeline latencies.

use std::fmt;

use crate::error::{Error, Result};

/// Reference CPU time for the 5000-event, 100-iteration, 64x64 batch.
pub const REFERENCE_CPU_SECONDS: f64 = 185.96e-3;
/// Reference GPU time for the same batch.
pub const REFERENCE_GPU_SECONDS: f64 = 473.51e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleParams {
    /// Events in the batch.
    pub total_events: u64,
    pub iterations: u64,
    /// Events inside the ROI.
    pub roi_events: u64,
    /// ROI pixel count; must be a multiple of 4.
    pub roi_pixels: u64,
    pub readout_latency: u64,
    pub voting_latency: u64,
    pub clock_hz: f64,
}

impl Default for CycleParams {
    fn default() -> Self {
        Self {
            total_events: 5000,
            iterations: 100,
            roi_events: 800,
            roi_pixels: 64 * 64,
            readout_latency: 32,
            voting_latency: 35,
            clock_hz: 210e6,
        }
    }
}

impl CycleParams {
    pub fn validate(&self) -> Result<()> {
        if !self.roi_pixels.is_multiple_of(4) {
            return Err(Error::Config(format!(
                "ROI pixel count {} is not divisible by 4",
                self.roi_pixels
            )));
        }
        if !(self.clock_hz > 0.0 && self.clock_hz.is_finite()) {
            return Err(Error::Config(format!(
                "clock must be positive, got {}",
                self.clock_hz
            )));
        }
        Ok(())
    }
}

pub fn cycles_per_batch(p: &CycleParams) -> Result<u64> {
    p.validate()?;
    let per_iteration = p.roi_events + p.readout_latency + p.roi_pixels / 4 + p.voting_latency;
    let cycles = p
        .iterations
        .checked_mul(per_iteration)
        .and_then(|c| c.checked_add(p.total_events))
        .ok_or_else(|| Error::Config("cycle count overflows u64".into()))?;
    Ok(cycles)
}

/// Projected processing time of one batch in seconds.
pub fn batch_time(p: &CycleParams) -> Result<f64> {
    Ok(cycles_per_batch(p)? as f64 / p.clock_hz)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    pub label: String,
    pub seconds: f64,
    /// `seconds / fpga_seconds`.
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupReport {
    pub params: CycleParams,
    pub cycles: u64,
    pub fpga_seconds: f64,
    pub rows: Vec<SpeedupRow>,
}

/// The reference CPU and GPU timings as report inputs.
pub fn reference_timings() -> Vec<(String, f64)> {
    vec![
        ("CPU".to_string(), REFERENCE_CPU_SECONDS),
        ("GPU".to_string(), REFERENCE_GPU_SECONDS),
    ]
}

/// Compares measured times against the projection for `p`. The projection
/// itself is always the first row.
pub fn speedup_report(p: &CycleParams, measured: &[(String, f64)]) -> Result<SpeedupReport> {
    let cycles = cycles_per_batch(p)?;
    let fpga_seconds = cycles as f64 / p.clock_hz;
    let mut rows = vec![SpeedupRow {
        label: "FPGA (model)".to_string(),
        seconds: fpga_seconds,
        speedup: 1.0,
    }];
    rows.extend(measured.iter().map(|(label, seconds)| SpeedupRow {
        label: label.clone(),
        seconds: *seconds,
        speedup: seconds / fpga_seconds,
    }));
    Ok(SpeedupReport {
        params: *p,
        cycles,
        fpga_seconds,
        rows,
    })
}

/// Formats `x` with three significant figures.
pub fn sig3(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let digits = (2 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.digits$}")
}

impl SpeedupReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,cycles,time_ms,speedup\n");
        for (k, r) in self.rows.iter().enumerate() {
            let cycles = if k == 0 {
                self.cycles.to_string()
            } else {
                String::new()
            };
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.label,
                cycles,
                r.seconds * 1e3,
                r.speedup
            ));
        }
        out
    }
}

impl fmt::Display for SpeedupReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.params;
        writeln!(
            f,
            "N={} T={} n={} P={} L_r={} L_v={} f_clk={} MHz",
            p.total_events,
            p.iterations,
            p.roi_events,
            p.roi_pixels,
            p.readout_latency,
            p.voting_latency,
            p.clock_hz / 1e6
        )?;
        writeln!(f, "cycles per batch: {}", self.cycles)?;
        writeln!(f, "projected time:   {:.4} ms", self.fpga_seconds * 1e3)?;
        writeln!(f)?;
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
        writeln!(f, "{:<width$}  {:>12}  {:>9}", "label", "time [ms]", "speedup")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<width$}  {:>12}  {:>8}x",
                r.label,
                sig3(r.seconds * 1e3),
                sig3(r.speedup)
            )?;
        }
        Ok(())
    }
}
