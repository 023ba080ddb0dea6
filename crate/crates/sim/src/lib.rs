//! Experiment runner and file formats around `misobc-core`: channel files,
//! TOML scenarios, CSV output and the `misobc` command line.

// `!(x > 0.0)` also rejects NaN in config values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod repro;

pub use error::{Result, SimError};
pub use misobc_core as core;
