//! Frequency-emergency load shedding with autonomous smart outlets.
//!
//! * [`sfr`]: aggregate frequency response of the grid after step power losses.
//! * [`control`]: cloud-side registry, block ranking and pre-event parameters.
//! * [`agent`]: the per-outlet detection, estimation and switching state machine.
//! * [`net`]: deterministic discrete-event message bus.
//! * [`harness`]: scenarios, Monte-Carlo experiments and closed-loop runs.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod control;
pub mod error;
pub mod harness;
pub mod net;
pub mod provenance;
pub mod rng;
pub mod sfr;

pub use error::{Error, Result};
