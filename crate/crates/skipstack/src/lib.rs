//! File formats, experiment drivers and the `skipstack` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod formats;
pub mod manifest;
pub mod recognition;
pub mod svg;

pub use error::{CliError, Result};
