//! Average achievable rates of continuum-layered (broadcast approach)
//! transmission to two colocated receivers over independent block Rayleigh
//! fading, under amplify-and-forward, Wyner-Ziv compress-and-forward and
//! decode-and-forward cooperation.
//!
//! Every cooperative scheme is reduced to an *equivalent fading gain*: a
//! scalar `s` such that the destination decodes exactly the layers a
//! point-to-point channel with SNR `s * Ps` would. Once the law of `s` is
//! known, [`rate_engine`] turns it into an optimal layering and an average
//! rate. The [`oracle`] module samples the fading directly and checks those
//! laws and rates by Monte Carlo.
//!
//! All rates are in nats.

// Argument checks are written `!(x >= 0.0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod af;
pub mod bounds;
pub mod cf;
pub mod df;
mod error;
pub mod fading;
pub mod numerics;
pub mod oracle;
pub mod rate_engine;
pub mod strategies;
pub mod validate;

pub use error::{Error, Result};
pub use fading::{CoopMode, FadingPair, GainDistribution, PowerAllocation, PowerConfig};
