//! Proactive content caching at a mobile device over a time-varying channel.
//!
//! The crate models a cache that may pre-download contents with finite
//! lifetimes before the user asks for them, paying a channel-dependent cost
//! per download. It provides the simulator, threshold policies (LISO and
//! LFA), finite-difference and likelihood-ratio policy-gradient training,
//! the unlimited-cache and non-causal lower bounds, an exact solver for tiny
//! instances, and the experiment harness behind the `proactive-cache` CLI.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod channel;
pub mod content_model;
pub mod env;
pub mod error;
pub mod experiment;
pub mod pg;
pub mod policy;
pub mod seed;
pub mod stats;

pub use error::{CacheError, Result};
