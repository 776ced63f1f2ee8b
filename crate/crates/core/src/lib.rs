//! Secret key generation from reciprocal multipath channel measurements.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`] draws multipath realizations and their tone/delay-bin coefficients.
//! - [`sounding`] turns a realization into Alice's and Bob's noisy observations.
//! - [`capacity`] evaluates secret key capacity (closed form and Monte Carlo),
//!   backed by the estimators in [`mi`].
//! - [`quantize`] maps observations to symbols and computes Bob's evidence.
//! - [`codec`] builds sparse parity-check codes and runs the syndrome decoders.
//! - [`pipeline`] wires everything into a full key agreement session.
//! - [`experiments`] holds the sweeps behind the command-line harness.

pub mod capacity;
pub mod channel;
pub mod codec;
pub mod config;
pub mod error;
pub mod experiments;
pub mod mi;
pub mod pipeline;
pub mod quantize;
pub mod rng;
pub mod sounding;

pub use error::{Error, Result};
