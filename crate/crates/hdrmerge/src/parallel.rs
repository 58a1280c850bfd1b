//! Multi-threaded drivers. Work is split by pixel or by radiance level and
//! every result lands in a fixed slot, so output does not depend on the
//! number of threads.

use rayon::prelude::*;

use hdrmerge_core::estimators::{EstimatorKind, HatParams};
use hdrmerge_core::image::Merger;
use hdrmerge_core::simulator::{simulate_level, McConfig, McReport};
use hdrmerge_core::{CameraNoiseParams, ExposureStack, RadianceMap};

use crate::error::{Error, Result};

/// Runs `f` on a pool of `threads` workers (0 means one per core).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn merge_parallel(
    stack: &ExposureStack,
    kind: EstimatorKind,
    params: Option<&CameraNoiseParams>,
    hat: Option<HatParams>,
) -> Result<RadianceMap> {
    let merger = Merger::new(stack, kind, params, hat)?;
    let nc = merger.channel_count();
    let n = merger.pixel_count();
    let mut data = vec![0.0f32; n * nc];
    let mut validity = vec![true; n];
    data.par_chunks_mut(nc)
        .zip(validity.par_iter_mut())
        .enumerate()
        .try_for_each(|(p, (out, valid))| {
            *valid = merger.merge_pixel(p, out)?;
            Ok::<_, hdrmerge_core::Error>(())
        })?;
    Ok(RadianceMap::new(stack.width(), stack.height(), stack.channels().to_vec(), data, validity)?)
}

pub fn run_mc_parallel(cfg: &McConfig) -> Result<McReport> {
    cfg.validate()?;
    let levels = (0..cfg.n_phi).into_par_iter().map(|j| simulate_level(cfg, j)).collect::<Result<Vec<_>, _>>()?;
    Ok(McReport::from_levels(cfg.clone(), levels))
}
