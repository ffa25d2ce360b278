//! File formats, campaign IO and the command-line driver for
//! `icn-sentinel-core`.
//!
//! Data traces are CSV (`ts,group,<params...>[,label]`), event traces are one
//! symbol per line, and profiles, curve models, classifier models, reports
//! and manifests are JSON. Every JSON artifact carries the master seed and
//! the hash of the resolved run configuration.

pub mod commands;
pub mod config;
mod error;
pub mod formats;
pub mod manifest;

pub use error::{Error, Result};
