//! Group-sequential trial design, monitoring and simulation with weighted
//! log-rank tests for delayed treatment effects.
//!
//! The crate is organised bottom-up:
//!
//! - [`survival`]: piecewise-exponential survival and power-law recruitment models.
//! - [`counting`]: subject records, administrative cut-offs, risk tables and Kaplan-Meier curves.
//! - [`wlrt`]: weighted log-rank statistics (log-rank, Fleming-Harrington (0,1), modestly weighted).
//! - [`gs`]: alpha spending, boundary computation by recursive integration,
//!   the sequential monitoring state and the stage-wise p-value.
//! - [`design`]: expected events, information and power of a design by numerical integration.
//! - [`sim`]: Monte-Carlo operating characteristics with reproducible per-replicate streams.
//! - [`summaries`]: milestone survival, median and restricted mean survival time.
//! - [`config`] and [`cli`]: file formats and the command-line front end.

// `!(x > 0.0)` is used on purpose to reject NaN alongside non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod counting;
pub mod design;
pub mod error;
pub mod gs;
pub mod normal;
pub mod sim;
pub mod summaries;
pub mod survival;
pub mod wlrt;

pub use error::{Error, Result};
