//! Desk-scale O-RAN telemetry simulator with scheduled fault injection and a
//! forecast-then-classify fault predictor.
//!
//! The crate is organized as a pipeline:
//!
//! 1. [`injector`] samples a timeline of fault episodes (CPU stress, memory
//!    stress, packet loss) with randomized durations, intensity ramps and
//!    container assignments.
//! 2. [`sim`] generates multi-level telemetry (per-DU RAN counters at 100 ms,
//!    per-container platform metrics and host metrics at 1 s) and perturbs it
//!    according to the injection schedule.
//! 3. [`preprocess`] aligns everything onto a 1-second grid, imputes gaps,
//!    min-max normalizes, and cuts sliding windows.
//! 4. [`pca`] reduces each feature vector to a small latent vector.
//! 5. [`lstm`] forecasts the latent vector several seconds ahead.
//! 6. [`forest`] classifies the reconstructed forecast into a fault class
//!    (random forest, plus a boosted-stump baseline).
//! 7. [`eval`] runs the stratified cross-validation protocol and computes
//!    confusion-matrix metrics.
//!
//! Every random decision in the crate flows from a single root seed through
//! [`rng::RngStream`], so identical configurations produce identical outputs.
//! The runnable examples under `examples/` demonstrate each stage; the
//! `faultcast` binary wires the stages into `simulate`, `train`, `evaluate`
//! and `predict` subcommands.

pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod forest;
pub mod injector;
pub mod lstm;
pub mod pca;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod sim;
pub mod telemetry;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
