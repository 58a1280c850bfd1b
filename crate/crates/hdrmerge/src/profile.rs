//! Camera profiles as `key=value` files.

use std::path::Path;

use hdrmerge_core::CameraNoiseParams;

use crate::error::{Error, Result};
use crate::sidecar::{KeyValueWriter, KeyValues};

pub fn read_profile(path: &Path) -> Result<CameraNoiseParams> {
    let kv = KeyValues::read(path)?;
    let params = CameraNoiseParams {
        name: kv.get("name").unwrap_or("unnamed").to_string(),
        k_r: kv.require("k_r", path)?,
        k_g: kv.require("k_g", path)?,
        k_b: kv.require("k_b", path)?,
        sigma_read: kv.require("sigma_read", path)?,
        sigma_adc: kv.require("sigma_adc", path)?,
        black_level: kv.get_parsed("black_level", path)?.unwrap_or(0.0),
        saturation: kv.require("saturation", path)?,
        bit_depth: kv.get_parsed("bit_depth", path)?.unwrap_or(14),
        static_noise_multiplier: kv.get_parsed("static_noise_multiplier", path)?.unwrap_or(1.0),
    };
    params.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(params)
}

pub fn profile_text(params: &CameraNoiseParams, comments: &[String]) -> KeyValueWriter {
    let mut kv = KeyValueWriter::default();
    for c in comments {
        kv.comment(c);
    }
    kv.entry("name", &params.name)
        .entry("k_r", params.k_r)
        .entry("k_g", params.k_g)
        .entry("k_b", params.k_b)
        .entry("sigma_read", params.sigma_read)
        .entry("sigma_adc", params.sigma_adc)
        .entry("black_level", params.black_level)
        .entry("saturation", params.saturation)
        .entry("bit_depth", params.bit_depth);
    if params.static_noise_multiplier != 1.0 {
        kv.entry("static_noise_multiplier", params.static_noise_multiplier);
    }
    kv
}

pub fn write_profile(params: &CameraNoiseParams, path: &Path, comments: &[String]) -> Result<()> {
    profile_text(params, comments).write(path)
}
