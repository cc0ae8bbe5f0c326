//! Communication over an AWGN channel whose transmitter is powered by
//! stochastic energy harvesting.
//!
//! The crate covers two time scales:
//!
//! * per channel use: energy arrivals, a battery that enforces energy
//!   causality, random Gaussian codebooks, and the save-and-transmit and
//!   best-effort-transmit schemes ([`arrivals`], [`energy_ledger`], [`coding`]);
//! * per large slot: the offline power allocation that maximizes average
//!   throughput under cumulative causality constraints ([`allocation`]).
//!
//! [`experiments`] holds the seeded Monte Carlo harness that ties the two
//! together and emits plot-ready CSV/JSON.

pub mod allocation;
pub mod arrivals;
pub mod coding;
pub mod energy_ledger;
mod error;
pub mod experiments;
pub mod numeric;
pub mod seed;

pub use error::{Error, Result};
