//! Portable float maps.
//!
//! A header of three whitespace-separated tokens (`PF` for three channels or
//! `Pf` for one, `width height`, and a scale whose sign gives the byte order,
//! negative meaning little-endian) is followed by a single whitespace byte and
//! the raw 32-bit samples, bottom row first. In memory rows run top to bottom.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteOrder {
    Little,
    Big,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pfm {
    pub width: usize,
    pub height: usize,
    /// 1 or 3.
    pub channels: usize,
    /// Row-major, top row first, channels interleaved.
    pub data: Vec<f32>,
}

impl Pfm {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Invalid(format!("a float map holds 1 or 3 channels, not {channels}")));
        }
        match sample_count(width, height, channels) {
            Some(n) if n == data.len() => Ok(Pfm { width, height, channels, data }),
            Some(n) => Err(Error::Invalid(format!("expected {n} samples, got {}", data.len()))),
            None => Err(Error::Invalid("float map dimensions overflow".into())),
        }
    }
}

fn sample_count(width: usize, height: usize, channels: usize) -> Option<usize> {
    width.checked_mul(height)?.checked_mul(channels)
}

/// Splits off the next whitespace-delimited token, skipping leading
/// whitespace. Returns the token and the offset just past it.
fn token(bytes: &[u8], mut pos: usize) -> Option<(&[u8], usize)> {
    while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
        pos += 1;
    }
    let start = pos;
    while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
        pos += 1;
    }
    (pos > start).then(|| (&bytes[start..pos], pos))
}

fn parse<T: std::str::FromStr>(tok: &[u8]) -> Option<T> {
    std::str::from_utf8(tok).ok()?.parse().ok()
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Pfm> {
    let bad = |m: &str| Error::format(path, m.to_string());
    let (magic, pos) = token(bytes, 0).ok_or_else(|| bad("empty file"))?;
    let channels = match magic {
        b"PF" => 3,
        b"Pf" => 1,
        _ => return Err(bad("not a float map (magic must be PF or Pf)")),
    };
    let (w, pos) = token(bytes, pos).ok_or_else(|| bad("missing width"))?;
    let (h, pos) = token(bytes, pos).ok_or_else(|| bad("missing height"))?;
    let (s, pos) = token(bytes, pos).ok_or_else(|| bad("missing scale"))?;
    let width: usize = parse(w).ok_or_else(|| bad("width is not a non-negative integer"))?;
    let height: usize = parse(h).ok_or_else(|| bad("height is not a non-negative integer"))?;
    let scale: f64 = parse(s).ok_or_else(|| bad("scale is not a number"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(bad("scale must be finite and non-zero"));
    }
    let order = if scale < 0.0 { ByteOrder::Little } else { ByteOrder::Big };
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad("header must end with a single whitespace byte"));
    }
    let body = &bytes[pos + 1..];
    let n = sample_count(width, height, channels).ok_or_else(|| bad("dimensions overflow"))?;
    let n_bytes = n.checked_mul(4).ok_or_else(|| bad("dimensions overflow"))?;
    if body.len() != n_bytes {
        return Err(bad(&format!("expected {n_bytes} bytes of samples, found {}", body.len())));
    }
    let row = width * channels;
    let mut data = vec![0.0f32; n];
    for (i, chunk) in body.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = match order {
            ByteOrder::Little => f32::from_le_bytes(b),
            ByteOrder::Big => f32::from_be_bytes(b),
        };
        let (file_row, col) = (i / row, i % row);
        data[(height - 1 - file_row) * row + col] = v;
    }
    Ok(Pfm { width, height, channels, data })
}

pub fn encode(pfm: &Pfm, order: ByteOrder) -> Vec<u8> {
    let magic = if pfm.channels == 3 { "PF" } else { "Pf" };
    let scale = if order == ByteOrder::Little { "-1.0" } else { "1.0" };
    let mut out = format!("{magic}\n{} {}\n{scale}\n", pfm.width, pfm.height).into_bytes();
    out.reserve(pfm.data.len() * 4);
    let row = pfm.width * pfm.channels;
    if row > 0 {
        for line in pfm.data.chunks_exact(row).rev() {
            for v in line {
                out.extend_from_slice(&match order {
                    ByteOrder::Little => v.to_le_bytes(),
                    ByteOrder::Big => v.to_be_bytes(),
                });
            }
        }
    }
    out
}

pub fn read(path: &Path) -> Result<Pfm> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

pub fn write(pfm: &Pfm, path: &Path, order: ByteOrder) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(pfm, order)).map_err(|e| Error::io(path, e))
}
