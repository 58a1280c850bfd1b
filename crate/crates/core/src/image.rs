//! Exposure stacks, radiance maps and per-pixel merging.

use alloc::vec;
use alloc::vec::Vec;

use crate::estimators::{estimate, EstimatorKind, EstimatorSettings, HatParams, Observation};
use crate::noise::{CameraNoiseParams, ChannelId, ExposureMeta};
use crate::{Error, Result};

/// One linear capture. Samples are row-major, interleaved by channel, and
/// black-level-subtracted.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    pub width: usize,
    pub height: usize,
    pub channels: Vec<ChannelId>,
    pub data: Vec<f32>,
    pub meta: ExposureMeta,
    /// Saturation point in black-level-subtracted counts.
    pub saturation: f64,
}

impl RawFrame {
    pub fn new(width: usize, height: usize, channels: Vec<ChannelId>, data: Vec<f32>, meta: ExposureMeta, saturation: f64) -> Result<Self> {
        let frame = RawFrame { width, height, channels, data, meta, saturation };
        frame.validate()?;
        Ok(frame)
    }

    pub fn validate(&self) -> Result<()> {
        self.meta.validate()?;
        if self.channels.is_empty() {
            return Err(Error::InvalidConfig("frame has no channels"));
        }
        let expected = self
            .width
            .checked_mul(self.height)
            .and_then(|n| n.checked_mul(self.channels.len()))
            .ok_or(Error::InvalidConfig("frame dimensions overflow"))?;
        if self.data.len() != expected {
            return Err(Error::InvalidConfig("frame data length does not match its dimensions"));
        }
        if !(self.saturation > 0.0) {
            return Err(Error::InvalidConfig("saturation must be positive"));
        }
        Ok(())
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Aligned frames of one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureStack {
    pub frames: Vec<RawFrame>,
    pub camera: Option<CameraNoiseParams>,
}

impl ExposureStack {
    pub fn new(frames: Vec<RawFrame>, camera: Option<CameraNoiseParams>) -> Result<Self> {
        let stack = ExposureStack { frames, camera };
        stack.validate()?;
        Ok(stack)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.frames.first().ok_or(Error::EmptyStack)?;
        for (index, f) in self.frames.iter().enumerate() {
            f.validate()?;
            if f.width != first.width || f.height != first.height || f.channels != first.channels {
                return Err(Error::DimensionMismatch { index });
            }
        }
        if let Some(c) = &self.camera {
            c.validate()?;
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn channels(&self) -> &[ChannelId] {
        &self.frames[0].channels
    }
}

/// Estimated relative radiance. `validity[p]` is false where every exposure
/// of some channel was saturated.
#[derive(Debug, Clone, PartialEq)]
pub struct RadianceMap {
    pub width: usize,
    pub height: usize,
    pub channels: Vec<ChannelId>,
    pub data: Vec<f32>,
    pub validity: Vec<bool>,
}

impl RadianceMap {
    pub fn new(width: usize, height: usize, channels: Vec<ChannelId>, data: Vec<f32>, validity: Vec<bool>) -> Result<Self> {
        let map = RadianceMap { width, height, channels, data, validity };
        map.validate()?;
        Ok(map)
    }

    /// A map holding the same value everywhere.
    pub fn constant(width: usize, height: usize, channels: Vec<ChannelId>, value: f32) -> Self {
        let n = width * height;
        RadianceMap { width, height, data: vec![value; n * channels.len()], channels, validity: vec![true; n] }
    }

    pub fn validate(&self) -> Result<()> {
        let pixels = self.width.checked_mul(self.height).ok_or(Error::InvalidConfig("map dimensions overflow"))?;
        let values = pixels.checked_mul(self.channels.len()).ok_or(Error::InvalidConfig("map dimensions overflow"))?;
        if self.channels.is_empty() || self.data.len() != values || self.validity.len() != pixels {
            return Err(Error::InvalidConfig("radiance map buffers do not match its dimensions"));
        }
        Ok(())
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// A validated merge job. [`merge_pixel`](Merger::merge_pixel) is pure, so
/// callers may split pixels across threads in any way.
#[derive(Debug, Clone)]
pub struct Merger<'a> {
    stack: &'a ExposureStack,
    kind: EstimatorKind,
    params: Option<&'a CameraNoiseParams>,
    settings: EstimatorSettings,
    /// Colour coefficient per channel slot.
    k: Vec<f64>,
    /// Radiance assigned to pixels that are saturated everywhere.
    clip_value: Vec<f64>,
}

impl<'a> Merger<'a> {
    /// `params` overrides the stack's camera. Without any parameters the
    /// colour coefficients are taken as one, which leaves the
    /// parameter-free estimators unchanged up to a global scale.
    /// `hat` defaults to the range `[0, saturation of the first frame]`.
    pub fn new(stack: &'a ExposureStack, kind: EstimatorKind, params: Option<&'a CameraNoiseParams>, hat: Option<HatParams>) -> Result<Self> {
        stack.validate()?;
        let params = params.or(stack.camera.as_ref());
        if kind.requires_noise_params() && params.is_none() {
            return Err(Error::MissingParams(kind));
        }
        let hat = hat.unwrap_or_else(|| HatParams::for_saturation(stack.frames[0].saturation));
        hat.validate()?;
        let k: Vec<f64> = stack.channels().iter().map(|&ch| params.map_or(1.0, |p| p.k(ch))).collect();
        let shortest = stack
            .frames
            .iter()
            .min_by(|a, b| a.meta.scale().total_cmp(&b.meta.scale()))
            .expect("validated stack has frames");
        let clip_value = k.iter().map(|k| shortest.saturation / (shortest.meta.scale() * k)).collect();
        Ok(Merger { stack, kind, params, settings: EstimatorSettings { hat, ..Default::default() }, k, clip_value })
    }

    pub fn pixel_count(&self) -> usize {
        self.stack.frames[0].pixel_count()
    }

    pub fn channel_count(&self) -> usize {
        self.k.len()
    }

    /// Writes the estimate of every channel of pixel `p` into `out` and
    /// returns whether all channels had an unsaturated observation.
    pub fn merge_pixel(&self, p: usize, out: &mut [f32]) -> Result<bool> {
        let nc = self.channel_count();
        let mut obs: Vec<Observation> = Vec::with_capacity(self.stack.frames.len());
        let mut raw: Vec<f64> = Vec::with_capacity(self.stack.frames.len());
        let mut valid = true;
        for c in 0..nc {
            obs.clear();
            raw.clear();
            for f in &self.stack.frames {
                let y = f.data[p * nc + c] as f64;
                obs.push(Observation::from_raw(y, f.meta, self.k[c], f.saturation));
                raw.push(y);
            }
            out[c] = match estimate(self.kind, &obs, &raw, self.params, &self.settings) {
                Ok(v) => v as f32,
                Err(Error::Saturated) => {
                    valid = false;
                    self.clip_value[c] as f32
                }
                Err(e) => return Err(e),
            };
        }
        Ok(valid)
    }

    pub fn merge(&self) -> Result<RadianceMap> {
        let nc = self.channel_count();
        let n = self.pixel_count();
        let mut data = vec![0.0f32; n * nc];
        let mut validity = vec![true; n];
        for (p, (out, valid)) in data.chunks_exact_mut(nc).zip(validity.iter_mut()).enumerate() {
            *valid = self.merge_pixel(p, out)?;
        }
        Ok(RadianceMap { width: self.stack.width(), height: self.stack.height(), channels: self.stack.channels().to_vec(), data, validity })
    }
}

/// Merges a stack with estimator `kind`, one pixel at a time.
pub fn merge_stack(stack: &ExposureStack, kind: EstimatorKind, params: Option<&CameraNoiseParams>, hat: Option<HatParams>) -> Result<RadianceMap> {
    Merger::new(stack, kind, params, hat)?.merge()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::vec::Vec;

    fn frame(values: &[f32], t: f64, g: f64, saturation: f64) -> RawFrame {
        RawFrame::new(values.len(), 1, vec![ChannelId::G], values.to_vec(), ExposureMeta { t, g }, saturation).unwrap()
    }

    #[test]
    fn one_by_one_identity() {
        let stack = ExposureStack::new(vec![frame(&[1.0], 1.0, 1.0, 100.0)], None).unwrap();
        let mut cam = CameraNoiseParams::noiseless(100.0);
        cam.k_g = 1.0;
        for kind in EstimatorKind::ALL {
            let map = merge_stack(&stack, kind, Some(&cam), None).unwrap();
            if kind == EstimatorKind::NPNE {
                // closed form, not x itself
                assert_eq!(map.data[0], (2f64.sqrt() - 1.0) as f32);
            } else if kind == EstimatorKind::FullMLE {
                assert!((map.data[0] - 0.618_034).abs() < 1e-5, "{}", map.data[0]);
            } else {
                assert_eq!(map.data, vec![1.0], "{kind}");
            }
            assert_eq!(map.validity, vec![true]);
        }
    }

    #[test]
    fn saturated_samples_are_excluded_and_flagged() {
        let long = frame(&[100.0, 100.0, 40.0], 1.0, 1.0, 100.0);
        let short = frame(&[30.0, 100.0, 4.0], 0.1, 1.0, 100.0);
        let stack = ExposureStack::new(vec![long, short], None).unwrap();
        let map = merge_stack(&stack, EstimatorKind::PPNE, None, None).unwrap();
        assert_eq!(map.data[0], 300.0);
        assert_eq!(map.validity, vec![true, false, true]);
        // clamp to the largest value the shortest exposure can represent
        assert_eq!(map.data[1], 1000.0);
        assert_eq!(map.data[2], ((40.0 * 1.0 + 40.0 * 0.1) / 1.1) as f32);
    }

    #[test]
    fn ppne_is_invariant_to_colour_scale() {
        let frames = vec![frame(&[10.0, 200.0, -3.0], 1.0, 8.0, 16383.0), frame(&[0.5, 7.0, 1.0], 1.0 / 32.0, 8.0, 16383.0)];
        let stack = ExposureStack::new(frames, None).unwrap();
        let mut a = CameraNoiseParams::sony_a7r3();
        let base = merge_stack(&stack, EstimatorKind::PPNE, Some(&a), None).unwrap();
        a.k_g *= 3.0;
        let scaled = merge_stack(&stack, EstimatorKind::PPNE, Some(&a), None).unwrap();
        for (x, y) in base.data.iter().zip(&scaled.data) {
            assert!((x / y - 3.0).abs() < 1e-6);
        }
        // ratios between pixels, the relative radiance, are unchanged
        assert!(((base.data[1] / base.data[0]) - (scaled.data[1] / scaled.data[0])).abs() < 1e-5);
    }

    #[test]
    fn errors() {
        assert_eq!(ExposureStack::new(Vec::new(), None), Err(Error::EmptyStack));
        let a = frame(&[1.0, 2.0], 1.0, 1.0, 10.0);
        let b = frame(&[1.0], 1.0, 1.0, 10.0);
        assert_eq!(ExposureStack::new(vec![a.clone(), b], None), Err(Error::DimensionMismatch { index: 1 }));
        assert!(RawFrame::new(2, 2, vec![ChannelId::G], vec![0.0; 3], ExposureMeta { t: 1.0, g: 1.0 }, 1.0).is_err());
        let stack = ExposureStack::new(vec![a], None).unwrap();
        assert_eq!(merge_stack(&stack, EstimatorKind::IterativeEM, None, None), Err(Error::MissingParams(EstimatorKind::IterativeEM)));
    }

    #[test]
    fn colour_channels_use_their_own_coefficient() {
        let data: Vec<f32> = vec![10.0, 20.0, 30.0];
        let f = RawFrame::new(1, 1, vec![ChannelId::R, ChannelId::G, ChannelId::B], data, ExposureMeta { t: 2.0, g: 1.0 }, 1000.0).unwrap();
        let stack = ExposureStack::new(vec![f], None).unwrap();
        let mut cam = CameraNoiseParams::noiseless(1000.0);
        cam.k_r = 0.5;
        cam.k_g = 1.0;
        cam.k_b = 2.0;
        let map = merge_stack(&stack, EstimatorKind::Uniform, Some(&cam), None).unwrap();
        assert_eq!(map.data, vec![10.0, 10.0, 7.5]);
    }
}
