//! Freshness-aware inference metrics and transmission scheduling.
//!
//! The crate goes from data to schedules:
//!
//! - [`info_metrics`] turns labelled time series (or analytic chain models)
//!   into inference-error-versus-AoI curves and their monotone decomposition.
//! - [`penalty`] holds the resulting AoI penalty `p(δ)` and the distribution of
//!   feature transmission times.
//! - [`gittins`] computes the Gittins index `γ(δ)` that drives every scheduler.
//! - [`single_source`] solves for the optimal threshold and buffer position of
//!   one source and cross-checks it against relative value iteration.
//! - [`multi_source`] computes Whittle indices for many sources sharing one channel.
//! - [`policy`] and [`simulator`] run the schedulers on a slotted channel.

pub mod error;
pub mod gittins;
pub mod info_metrics;
pub mod multi_source;
pub mod numeric;
pub mod penalty;
pub mod policy;
pub mod simulator;
pub mod single_source;

pub use error::{Error, Result};
