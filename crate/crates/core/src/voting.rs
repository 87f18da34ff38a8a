//! Bilinear voting of warped events into the image of warped events (IWE)
//! and its two velocity-derivative images.
//!
//! Two accumulators share the [`Accumulator`] interface:
//!
//! * [`NaiveAccumulator`] adds every contribution straight into three dense
//!   grids.
//! * [`BankedAccumulator`] models the hardware datapath: each image is split
//!   over four memory banks by pixel-coordinate parity, so the four pixels of
//!   one bilinear stencil always hit four different banks. Every bank is a
//!   read / add / write pipeline with a small forwarding buffer that hands
//!   in-flight sums to reads of the same address. Readout zeroes each cell
//!   as it is read.
//!
//! Both accumulators apply the same additions in the same order per pixel, so
//! their results are bit-identical.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use arrayvec::ArrayVec;
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::warp::WarpedEvent;

/// Stages of the per-bank read-modify-write pipeline.
pub const PIPELINE_DEPTH: usize = 3;
/// Entries held by each bank's forwarding buffer.
pub const FORWARD_DEPTH: usize = 3;
/// Parity banks per image.
pub const BANKS_PER_IMAGE: usize = 4;

/// One pixel's share of a warped event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoteContribution {
    /// ROI-local `(column, row)`.
    pub pixel: (usize, usize),
    /// Bilinear weight in `[0, 1]`.
    pub weight: f64,
    /// Contribution to the derivative of the IWE with respect to `vx`.
    pub dwx: f64,
    /// Contribution to the derivative of the IWE with respect to `vy`.
    pub dwy: f64,
}

/// Full four-pixel stencil of an event, ordered `(i, j)`, `(i+1, j)`,
/// `(i, j+1)`, `(i+1, j+1)`, with pixel coordinates that may fall outside
/// any grid.
pub fn stencil(we: &WarpedEvent) -> [((i64, i64), f64, f64, f64); 4] {
    let fx = we.xw.floor();
    let fy = we.yw.floor();
    let dx = we.xw - fx;
    let dy = we.yw - fy;
    let (i, j) = (fx as i64, fy as i64);
    // d(warped x)/d(vx) = -dt; likewise for y.
    let s = -we.norm_dt;
    [
        ((i, j), (1.0 - dx) * (1.0 - dy), s * -(1.0 - dy), s * -(1.0 - dx)),
        ((i.saturating_add(1), j), dx * (1.0 - dy), s * (1.0 - dy), s * -dx),
        ((i, j.saturating_add(1)), (1.0 - dx) * dy, s * -dy, s * (1.0 - dx)),
        (
            (i.saturating_add(1), j.saturating_add(1)),
            dx * dy,
            s * dy,
            s * dx,
        ),
    ]
}

/// Bilinear votes of `we` that land inside a `width x height` grid.
/// Out-of-grid pixels are dropped individually.
pub fn bilinear_votes(we: &WarpedEvent, width: usize, height: usize) -> ArrayVec<VoteContribution, 4> {
    stencil(we)
        .into_iter()
        .filter_map(|((i, j), weight, dwx, dwy)| {
            if i >= 0 && j >= 0 && (i as usize) < width && (j as usize) < height {
                Some(VoteContribution {
                    pixel: (i as usize, j as usize),
                    weight,
                    dwx,
                    dwy,
                })
            } else {
                None
            }
        })
        .collect()
}

/// The three accumulated images over an ROI grid, indexed `[[row, column]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    pub iwe: Array2<f64>,
    pub d_vx: Array2<f64>,
    pub d_vy: Array2<f64>,
    /// Sum of all accepted bilinear weights.
    pub in_bounds_mass: f64,
}

impl ImageSet {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            iwe: Array2::zeros((height, width)),
            d_vx: Array2::zeros((height, width)),
            d_vy: Array2::zeros((height, width)),
            in_bounds_mass: 0.0,
        }
    }

    pub fn width(&self) -> usize {
        self.iwe.ncols()
    }

    pub fn height(&self) -> usize {
        self.iwe.nrows()
    }

    /// Merges a shard accumulated over a disjoint subset of events.
    pub fn merge(&mut self, other: &ImageSet) {
        self.iwe += &other.iwe;
        self.d_vx += &other.d_vx;
        self.d_vy += &other.d_vy;
        self.in_bounds_mass += other.in_bounds_mass;
    }
}

/// Counters tied to the terms of the cycle model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AccumulatorStats {
    /// Events pushed through voting.
    pub votes_issued: u64,
    /// Pixel addresses read back per image during readout.
    pub readout_addresses: u64,
    /// Voted events per parity class of their anchor pixel `(i, j)`, indexed
    /// `(i & 1) + 2 * (j & 1)`.
    pub anchor_parity: [u64; BANKS_PER_IMAGE],
}

impl AccumulatorStats {
    fn record_vote(&mut self, we: &WarpedEvent) {
        self.votes_issued += 1;
        let i = we.xw.floor() as i64;
        let j = we.yw.floor() as i64;
        self.anchor_parity[parity_bank(i, j)] += 1;
    }
}

fn parity_bank(i: i64, j: i64) -> usize {
    (i.rem_euclid(2) + 2 * j.rem_euclid(2)) as usize
}

/// Which accumulator implementation to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AccumulatorMode {
    #[default]
    Naive,
    Banked,
}

impl fmt::Display for AccumulatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccumulatorMode::Naive => "naive",
            AccumulatorMode::Banked => "banked",
        })
    }
}

impl FromStr for AccumulatorMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(AccumulatorMode::Naive),
            "banked" => Ok(AccumulatorMode::Banked),
            other => Err(Error::Config(format!("unknown accumulator mode `{other}`"))),
        }
    }
}

pub trait Accumulator {
    fn width(&self) -> usize;
    fn height(&self) -> usize;

    /// Votes one warped event into the three images.
    fn vote(&mut self, we: &WarpedEvent);

    /// Returns the accumulated images and leaves the accumulator zeroed.
    fn clear_on_read(&mut self) -> ImageSet;

    fn stats(&self) -> AccumulatorStats;

    fn accumulate(&mut self, warped: &[WarpedEvent]) {
        for we in warped {
            self.vote(we);
        }
    }
}

/// Builds an accumulator of the requested kind.
pub fn new_accumulator(
    mode: AccumulatorMode,
    width: usize,
    height: usize,
) -> Result<Box<dyn Accumulator + Send>> {
    Ok(match mode {
        AccumulatorMode::Naive => Box::new(NaiveAccumulator::new(width, height)?),
        AccumulatorMode::Banked => Box::new(BankedAccumulator::new(width, height)?),
    })
}

fn check_grid(width: usize, height: usize) -> Result<()> {
    if width < 2 || height < 2 {
        return Err(Error::Config(format!(
            "accumulation grid must be at least 2x2, got {width}x{height}"
        )));
    }
    Ok(())
}

/// Dense grids, one addition per contribution.
#[derive(Debug, Clone)]
pub struct NaiveAccumulator {
    images: ImageSet,
    stats: AccumulatorStats,
}

impl NaiveAccumulator {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        check_grid(width, height)?;
        Ok(Self {
            images: ImageSet::zeros(width, height),
            stats: AccumulatorStats::default(),
        })
    }
}

impl Accumulator for NaiveAccumulator {
    fn width(&self) -> usize {
        self.images.width()
    }

    fn height(&self) -> usize {
        self.images.height()
    }

    fn vote(&mut self, we: &WarpedEvent) {
        self.stats.record_vote(we);
        let (w, h) = (self.width(), self.height());
        for c in bilinear_votes(we, w, h) {
            let idx = [c.pixel.1, c.pixel.0];
            self.images.iwe[idx] += c.weight;
            self.images.d_vx[idx] += c.dwx;
            self.images.d_vy[idx] += c.dwy;
            self.images.in_bounds_mass += c.weight;
        }
    }

    fn clear_on_read(&mut self) -> ImageSet {
        let (w, h) = (self.width(), self.height());
        self.stats.readout_addresses += (w * h) as u64;
        std::mem::replace(&mut self.images, ImageSet::zeros(w, h))
    }

    fn stats(&self) -> AccumulatorStats {
        self.stats
    }
}

/// One parity bank: a memory plus a three-stage read / add / write pipeline.
///
/// Memory uses read-first semantics: a read in the same cycle as a write to
/// the same address sees the old value. Without forwarding, a sum is only
/// visible to reads issued at least three cycles after its own read.
#[derive(Debug, Clone)]
struct Bank {
    mem: Vec<f64>,
    /// Output of the read stage: (address, value read, increment).
    read_reg: Option<(usize, f64, f64)>,
    /// Output of the add stage: (address, sum) waiting for write-back.
    add_reg: Option<(usize, f64)>,
    /// Most recent sums, newest at the back.
    forward: VecDeque<(usize, f64)>,
    forwarding: bool,
    occupancy: u64,
}

impl Bank {
    fn new(size: usize, forwarding: bool) -> Self {
        Self {
            mem: vec![0.0; size],
            read_reg: None,
            add_reg: None,
            forward: VecDeque::with_capacity(FORWARD_DEPTH),
            forwarding,
            occupancy: 0,
        }
    }

    fn cycle(&mut self, input: Option<(usize, f64)>) {
        let write = self.add_reg.take();

        let sum = self.read_reg.take().map(|(addr, read, inc)| (addr, read + inc));
        if let (Some(entry), true) = (sum, self.forwarding) {
            if self.forward.len() == FORWARD_DEPTH {
                self.forward.pop_front();
            }
            self.forward.push_back(entry);
        }

        if let Some((addr, inc)) = input {
            self.occupancy += 1;
            let buffered = self
                .forward
                .iter()
                .rev()
                .find(|(a, _)| *a == addr)
                .map(|&(_, v)| v);
            let read = buffered.unwrap_or(self.mem[addr]);
            self.read_reg = Some((addr, read, inc));
        }

        if let Some((addr, value)) = write {
            self.mem[addr] = value;
        }
        self.add_reg = sum;
    }

    fn idle(&self) -> bool {
        self.read_reg.is_none() && self.add_reg.is_none()
    }

    /// Reads one address and writes zero back.
    fn read_and_clear(&mut self, addr: usize) -> f64 {
        std::mem::take(&mut self.mem[addr])
    }
}

/// Image roles in bank order.
const IWE: usize = 0;
const D_VX: usize = 1;
const D_VY: usize = 2;

/// Parity-partitioned, pipelined accumulator modelling the 12-bank hardware
/// layout (3 images x 4 parity banks).
#[derive(Debug, Clone)]
pub struct BankedAccumulator {
    width: usize,
    height: usize,
    banks: [[Bank; BANKS_PER_IMAGE]; 3],
    in_bounds_mass: f64,
    stats: AccumulatorStats,
}

impl BankedAccumulator {
    /// Grid dimensions must be even so the parity banks tile the grid.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        Self::with_forwarding(width, height, true)
    }

    /// With `forwarding = false` the pipeline loses updates when nearby
    /// events hit the same address; only useful to demonstrate the hazard.
    pub fn with_forwarding(width: usize, height: usize, forwarding: bool) -> Result<Self> {
        check_grid(width, height)?;
        if !width.is_multiple_of(2) || !height.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "banked accumulation needs even grid dimensions, got {width}x{height}"
            )));
        }
        let size = (width / 2) * (height / 2);
        let bank = || Bank::new(size, forwarding);
        let group = || [bank(), bank(), bank(), bank()];
        Ok(Self {
            width,
            height,
            banks: [group(), group(), group()],
            in_bounds_mass: 0.0,
            stats: AccumulatorStats::default(),
        })
    }

    fn address(&self, i: usize, j: usize) -> (usize, usize) {
        ((i & 1) + 2 * (j & 1), (j >> 1) * (self.width / 2) + (i >> 1))
    }

    fn clock(&mut self, inputs: &[[Option<(usize, f64)>; BANKS_PER_IMAGE]; 3]) {
        for (group, group_inputs) in self.banks.iter_mut().zip(inputs) {
            for (bank, input) in group.iter_mut().zip(group_inputs) {
                bank.cycle(*input);
            }
        }
    }

    fn flush(&mut self) {
        let bubbles = [[None; BANKS_PER_IMAGE]; 3];
        for _ in 0..PIPELINE_DEPTH {
            self.clock(&bubbles);
        }
        debug_assert!(self.banks.iter().flatten().all(Bank::idle));
    }

    /// Updates issued to each parity bank of one image.
    pub fn bank_occupancy(&self) -> [u64; BANKS_PER_IMAGE] {
        std::array::from_fn(|b| self.banks[IWE][b].occupancy)
    }
}

impl Accumulator for BankedAccumulator {
    fn width(&self) -> usize {
        self.width
    }

    fn height(&self) -> usize {
        self.height
    }

    fn vote(&mut self, we: &WarpedEvent) {
        self.stats.record_vote(we);
        let mut inputs = [[None; BANKS_PER_IMAGE]; 3];
        for c in bilinear_votes(we, self.width, self.height) {
            let (bank, addr) = self.address(c.pixel.0, c.pixel.1);
            inputs[IWE][bank] = Some((addr, c.weight));
            inputs[D_VX][bank] = Some((addr, c.dwx));
            inputs[D_VY][bank] = Some((addr, c.dwy));
            self.in_bounds_mass += c.weight;
        }
        self.clock(&inputs);
    }

    fn clear_on_read(&mut self) -> ImageSet {
        self.flush();
        let mut out = ImageSet::zeros(self.width, self.height);
        for j in 0..self.height {
            for i in 0..self.width {
                let (bank, addr) = self.address(i, j);
                out.iwe[[j, i]] = self.banks[IWE][bank].read_and_clear(addr);
                out.d_vx[[j, i]] = self.banks[D_VX][bank].read_and_clear(addr);
                out.d_vy[[j, i]] = self.banks[D_VY][bank].read_and_clear(addr);
            }
        }
        for bank in self.banks.iter_mut().flatten() {
            bank.forward.clear();
        }
        out.in_bounds_mass = std::mem::take(&mut self.in_bounds_mass);
        self.stats.readout_addresses += (self.width * self.height) as u64;
        out
    }

    fn stats(&self) -> AccumulatorStats {
        self.stats
    }
}

pub fn accumulate_naive(warped: &[WarpedEvent], width: usize, height: usize) -> Result<ImageSet> {
    let mut acc = NaiveAccumulator::new(width, height)?;
    acc.accumulate(warped);
    Ok(acc.clear_on_read())
}

pub fn accumulate_banked(warped: &[WarpedEvent], width: usize, height: usize) -> Result<ImageSet> {
    let mut acc = BankedAccumulator::new(width, height)?;
    acc.accumulate(warped);
    Ok(acc.clear_on_read())
}
