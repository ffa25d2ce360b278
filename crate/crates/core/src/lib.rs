//! Anomaly detection for industrial process data.
//!
//! Two detectors are combined: threshold profiling of physical parameter
//! readings (trim means, tolerance regions, per-parameter thresholds, three
//! interchangeable classifiers) and inter-arrival-curve analysis of discrete
//! event traces. The crate also carries a synthetic campaign generator and the
//! evaluation harness that scores detectors by attack detection rate, false
//! positive rate and system accuracy.
//!
//! The crate is `no_std` (with `alloc`); file formats and the command-line
//! driver live in the `icn-sentinel` companion crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod classifiers;
pub mod data;
mod error;
pub mod featsel;
pub mod harness;
pub mod iac;
pub mod profiler;
mod rng;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use rng::derive_seed;
