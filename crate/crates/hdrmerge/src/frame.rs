//! Frames and radiance maps on disk.
//!
//! A frame `shot.pfm` carries its exposure in `shot.meta`:
//!
//! ```text
//! exposure_time_s=0.03125
//! gain=8            # or iso=800, read as gain = iso / 100
//! black_level=512   # subtracted on ingest
//! saturation=15871  # after black-level subtraction
//! channels=R,G,B    # defaults to G for one channel, R,G,B for three
//! ```
//!
//! A radiance map `out.pfm` is written with `out.meta` (its channel order)
//! and `out.mask.pgm`, an 8-bit map that is 255 where the pixel had at least
//! one unsaturated observation in every channel and 0 elsewhere.

use std::fs;
use std::path::{Path, PathBuf};

use hdrmerge_core::{ChannelId, ExposureMeta, ExposureStack, RadianceMap, RawFrame};

use crate::error::{Error, Result};
use crate::pfm::{self, ByteOrder, Pfm};
use crate::sidecar::{KeyValueWriter, KeyValues};

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta")
}

pub fn mask_path(path: &Path) -> PathBuf {
    path.with_extension("mask.pgm")
}

fn default_channels(n: usize) -> Vec<ChannelId> {
    if n == 3 {
        ChannelId::ALL.to_vec()
    } else {
        vec![ChannelId::G]
    }
}

fn parse_channels(kv: &KeyValues, n: usize, path: &Path) -> Result<Vec<ChannelId>> {
    let Some(list) = kv.get("channels") else {
        return Ok(default_channels(n));
    };
    let channels = list
        .split(',')
        .map(|c| c.trim().parse::<ChannelId>().map_err(|_| Error::format(path, format!("unknown channel {c:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if channels.len() != n {
        return Err(Error::format(path, format!("{} channels listed but the image has {n}", channels.len())));
    }
    Ok(channels)
}

fn channel_list(channels: &[ChannelId]) -> String {
    channels.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(",")
}

/// Reads a frame and subtracts the black level. An explicit `black_level`
/// takes precedence over the sidecar's.
pub fn read_frame(path: &Path, black_level: Option<f64>) -> Result<RawFrame> {
    let image = pfm::read(path)?;
    let meta_path = sidecar_path(path);
    let kv = KeyValues::read(&meta_path)?;
    let t: f64 = kv.require("exposure_time_s", &meta_path)?;
    let meta = match (kv.get_parsed::<f64>("gain", &meta_path)?, kv.get_parsed::<f64>("iso", &meta_path)?) {
        (Some(g), _) => ExposureMeta::new(t, g),
        (None, Some(iso)) => ExposureMeta::from_iso(t, iso),
        (None, None) => return Err(Error::format(&meta_path, "missing key gain (or iso)")),
    }
    .map_err(|e| Error::format(&meta_path, e.to_string()))?;
    let black = match black_level {
        Some(b) => b,
        None => kv.get_parsed("black_level", &meta_path)?.unwrap_or(0.0),
    };
    let saturation = kv.get_parsed("saturation", &meta_path)?.unwrap_or(f64::INFINITY);
    let channels = parse_channels(&kv, image.channels, &meta_path)?;
    let data = if black == 0.0 { image.data } else { image.data.iter().map(|v| (*v as f64 - black) as f32).collect() };
    RawFrame::new(image.width, image.height, channels, data, meta, saturation).map_err(|e| Error::format(path, e.to_string()))
}

/// Writes a frame with black level zero.
pub fn write_frame(frame: &RawFrame, path: &Path) -> Result<()> {
    frame.validate()?;
    pfm::write(&Pfm::new(frame.width, frame.height, frame.channels.len(), frame.data.clone())?, path, ByteOrder::Little)?;
    let mut kv = KeyValueWriter::default();
    kv.entry("exposure_time_s", frame.meta.t)
        .entry("gain", frame.meta.g)
        .entry("black_level", 0)
        .entry("saturation", frame.saturation)
        .entry("channels", channel_list(&frame.channels));
    kv.write(&sidecar_path(path))
}

pub fn read_stack(paths: &[PathBuf], black_level: Option<f64>) -> Result<ExposureStack> {
    let frames = paths.iter().map(|p| read_frame(p, black_level)).collect::<Result<Vec<_>>>()?;
    ExposureStack::new(frames, None).map_err(|e| Error::Invalid(format!("stack: {e}")))
}

/// Writes a map, its channel order and its validity mask. With
/// `clamp_negative` negative values are written as zero.
pub fn write_map(map: &RadianceMap, path: &Path, clamp_negative: bool) -> Result<()> {
    map.validate()?;
    let data = if clamp_negative { map.data.iter().map(|v| v.max(0.0)).collect() } else { map.data.clone() };
    pfm::write(&Pfm::new(map.width, map.height, map.channels.len(), data)?, path, ByteOrder::Little)?;
    let mut kv = KeyValueWriter::default();
    kv.entry("channels", channel_list(&map.channels));
    kv.write(&sidecar_path(path))?;
    write_mask(&map.validity, map.width, map.height, &mask_path(path))
}

/// Reads a map written by [`write_map`]. Missing sidecar or mask files mean
/// default channels and an all-valid mask.
pub fn read_map(path: &Path) -> Result<RadianceMap> {
    let image = pfm::read(path)?;
    let meta_path = sidecar_path(path);
    let channels = if meta_path.exists() {
        parse_channels(&KeyValues::read(&meta_path)?, image.channels, &meta_path)?
    } else {
        default_channels(image.channels)
    };
    let mask = mask_path(path);
    let validity = if mask.exists() { read_mask(&mask, image.width, image.height)? } else { vec![true; image.width * image.height] };
    RadianceMap::new(image.width, image.height, channels, image.data, validity).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_mask(validity: &[bool], width: usize, height: usize, path: &Path) -> Result<()> {
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend(validity.iter().map(|v| if *v { 255u8 } else { 0 }));
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_mask(path: &Path, width: usize, height: usize) -> Result<Vec<bool>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = format!("P5\n{width} {height}\n255\n");
    let body = bytes
        .strip_prefix(header.as_bytes())
        .ok_or_else(|| Error::format(path, format!("expected an 8-bit {width}x{height} grey map")))?;
    if body.len() != width * height {
        return Err(Error::format(path, "mask size does not match the map"));
    }
    Ok(body.iter().map(|b| *b != 0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_raw(dir: &Path, name: &str, values: &[f32], channels: usize, meta: &str) -> PathBuf {
        let path = dir.join(name);
        let w = values.len() / channels;
        pfm::write(&Pfm::new(w, 1, channels, values.to_vec()).unwrap(), &path, ByteOrder::Big).unwrap();
        fs::write(sidecar_path(&path), meta).unwrap();
        path
    }

    #[test]
    fn black_level_is_subtracted() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_raw(dir.path(), "a.pfm", &[100.0], 1, "exposure_time_s=1\ngain=1\nblack_level=64\n");
        assert_eq!(read_frame(&p, None).unwrap().data, vec![36.0]);
        assert_eq!(read_frame(&p, Some(0.0)).unwrap().data, vec![100.0]);
        assert_eq!(read_frame(&p, Some(64.0)).unwrap().data, vec![36.0]);
    }

    #[test]
    fn sidecar_keys() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_raw(dir.path(), "b.pfm", &[1.0, 2.0, 3.0], 3, "exposure_time_s=0.5\niso=800\nsaturation=1000\n");
        let f = read_frame(&p, None).unwrap();
        assert_eq!(f.meta, ExposureMeta { t: 0.5, g: 8.0 });
        assert_eq!(f.channels, ChannelId::ALL.to_vec());
        assert_eq!(f.saturation, 1000.0);

        let p = write_raw(dir.path(), "c.pfm", &[1.0, 2.0, 3.0], 3, "exposure_time_s=1\ngain=1\nchannels=B,G,R\n");
        assert_eq!(read_frame(&p, None).unwrap().channels, vec![ChannelId::B, ChannelId::G, ChannelId::R]);

        let p = write_raw(dir.path(), "d.pfm", &[1.0], 1, "gain=1\n");
        assert!(read_frame(&p, None).is_err());
        let p = write_raw(dir.path(), "e.pfm", &[1.0], 1, "exposure_time_s=1\n");
        assert!(read_frame(&p, None).is_err());
        let p = write_raw(dir.path(), "f.pfm", &[1.0], 1, "exposure_time_s=1\ngain=1\nchannels=R,G\n");
        assert!(read_frame(&p, None).is_err());
        let p = write_raw(dir.path(), "g.pfm", &[1.0], 1, "exposure_time_s=-1\ngain=1\n");
        assert!(read_frame(&p, None).is_err());
        assert!(read_frame(&dir.path().join("missing.pfm"), None).is_err());
    }

    #[test]
    fn map_round_trip_with_mask() {
        let dir = tempfile::tempdir().unwrap();
        let map = RadianceMap::new(2, 2, vec![ChannelId::R], vec![-1.5, 0.0, 3.25, f32::MAX], vec![true, false, true, true]).unwrap();
        let path = dir.path().join("m.pfm");
        write_map(&map, &path, false).unwrap();
        assert_eq!(read_map(&path).unwrap(), map);

        write_map(&map, &path, true).unwrap();
        let clamped = read_map(&path).unwrap();
        assert!(clamped.data.iter().all(|v| *v >= 0.0));
        assert_eq!(clamped.validity, map.validity);
    }

    #[test]
    fn frame_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let frame = RawFrame::new(2, 1, vec![ChannelId::G], vec![-3.0, 16383.0], ExposureMeta { t: 1.0 / 32.0, g: 8.0 }, 16383.0).unwrap();
        let path = dir.path().join("f.pfm");
        write_frame(&frame, &path).unwrap();
        assert_eq!(read_frame(&path, None).unwrap(), frame);
    }
}
