//! Noise-aware radiance estimation for HDR exposure stacks.
//!
//! The crate is `no_std` (it needs `alloc`) and carries every numerical part of
//! the toolkit:
//!
//! * [`noise`]: the photon + static sensor noise model, its moments and a
//!   forward sampler for synthetic RAW values.
//! * [`estimators`]: per-pixel radiance estimators (uniform, hat-shaped,
//!   variance-weighted, iterative EM, full MLE, NPNE, PPNE).
//! * [`calibration`]: fitting the five noise parameters from patch statistics.
//! * [`simulator`]: the Monte Carlo harness that measures bias and spread of
//!   the estimators over a radiance grid.
//! * [`image`]: in-memory exposure stacks, radiance maps and stack merging.
//!
//! File formats, parallel drivers and the command-line tool live in the
//! `hdrmerge` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod calibration;
mod error;
pub mod estimators;
pub mod image;
pub(crate) mod math;
pub mod noise;
pub mod optimize;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
pub use estimators::{EstimatorKind, HatParams, Observation};
pub use image::{ExposureStack, RadianceMap, RawFrame};
pub use noise::{CameraNoiseParams, ChannelId, ExposureMeta};
