//! Contrast maximization motion estimation for event cameras.
//!
//! Events are grouped into batches, warped to the batch midpoint under a
//! constant 2D velocity, and bilinearly voted into an image of warped events
//! (IWE) together with its two velocity-derivative images. The variance of
//! the IWE is maximized by plain gradient ascent using the analytic gradient
//! obtained from those three images.
//!
//! # Modules
//! - [`events`]: event model, text ingestion, batching, ROI selection.
//! - [`warp`]: constant-velocity warping.
//! - [`voting`]: bilinear voting, plus a banked accumulator that models the
//!   parity-partitioned, hazard-forwarded hardware datapath.
//! - [`objective`]: variance contrast and its gradient.
//! - [`optimizer`]: the gradient-ascent loop.
//! - [`tracker`]: ROI tracking over a stream.
//! - [`cyclemodel`]: closed-form cycle count of the hardware pipeline.
//! - [`synth`]: seeded synthetic scenes with ground truth.

pub mod cyclemodel;
pub mod error;
pub mod events;
pub mod objective;
pub mod optimizer;
pub mod pgm;
pub mod synth;
pub mod tracker;
pub mod voting;
pub mod warp;

pub use cyclemodel::{batch_time, cycles_per_batch, speedup_report, CycleParams, SpeedupReport};
pub use error::{Error, Result};
pub use events::{filter_roi, make_batch, parse_events, Event, EventBatch, Polarity, Roi, SensorGeometry};
pub use objective::{analytic_gradient, contrast, ContrastReport, Gradient};
pub use optimizer::{estimate_motion, OptimizationTrace, OptimizerConfig};
pub use tracker::{track, update_roi, TrackResult, TrackerConfig};
pub use voting::{
    accumulate_banked, accumulate_naive, bilinear_votes, Accumulator, AccumulatorMode, BankedAccumulator,
    ImageSet, NaiveAccumulator, VoteContribution,
};
pub use warp::{warp_batch, warp_event, Velocity, WarpedEvent};
