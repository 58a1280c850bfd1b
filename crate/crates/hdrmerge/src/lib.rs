//! File formats, parallel drivers and the `hdrmerge` command-line tool.
//! The numerical work lives in `hdrmerge-core`.

pub mod cli;
mod error;
pub mod frame;
pub mod parallel;
pub mod pfm;
pub mod profile;
pub mod report;
pub mod samples;
pub mod sidecar;

pub use error::{Error, Result};
