//! Sensor noise model.
//!
//! A RAW value recorded at radiance `phi` with exposure time `t` and gain `g`
//! is modelled as
//!
//! ```text
//! Y = Pois(phi t) g k_c + N(0, sigma_read) g k_c + N(0, sigma_adc) k_c
//! ```
//!
//! so that `E[Y] = phi t g k_c` and
//! `var(Y) = phi t g^2 k_c^2 + sigma_read^2 g^2 k_c^2 + sigma_adc^2 k_c^2`.
//! The two signal-independent terms are called static noise; they can be
//! scaled by [`CameraNoiseParams::static_noise_multiplier`].
//!
//! All in-memory values are black-level-subtracted. Samples may be negative.

use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use rand_core::RngCore;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::math;
use crate::{Error, Result};

/// Colour channel selecting which colour coefficient applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChannelId {
    R,
    G,
    B,
}

impl ChannelId {
    pub const ALL: [ChannelId; 3] = [ChannelId::R, ChannelId::G, ChannelId::B];

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelId::R => "R",
            ChannelId::G => "G",
            ChannelId::B => "B",
        }
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "R" | "r" => Ok(ChannelId::R),
            "G" | "g" => Ok(ChannelId::G),
            "B" | "b" => Ok(ChannelId::B),
            _ => Err(Error::InvalidParams("channel must be one of R, G, B")),
        }
    }
}

/// Exposure time (seconds) and gain of a single capture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExposureMeta {
    pub t: f64,
    pub g: f64,
}

impl ExposureMeta {
    pub fn new(t: f64, g: f64) -> Result<Self> {
        let meta = ExposureMeta { t, g };
        meta.validate()?;
        Ok(meta)
    }

    /// Gain from an ISO setting, assuming ISO 100 is unit gain and the mapping
    /// is linear.
    pub fn from_iso(t: f64, iso: f64) -> Result<Self> {
        Self::new(t, iso / 100.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t > 0.0 && self.g > 0.0 && self.t.is_finite() && self.g.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidExposure { t: self.t, g: self.g })
        }
    }

    /// Product `t * g`, the factor between radiance and expected count
    /// (before the colour coefficient).
    #[inline]
    pub fn scale(&self) -> f64 {
        self.t * self.g
    }
}

/// How the photon count is drawn by the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhotonDraw {
    /// Poisson distributed photon count.
    #[default]
    Poisson,
    /// Photon count replaced by its expectation. Only useful for checking the
    /// estimators on noiseless data.
    Expected,
}

/// Above this mean the Poisson photon count is drawn from a rounded normal
/// approximation `N(lambda, sqrt(lambda))`.
pub const POISSON_NORMAL_THRESHOLD: f64 = 1.0e4;

/// Noise parameters of one camera plus the sensor metadata needed to simulate
/// and merge its captures.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraNoiseParams {
    pub name: String,
    pub k_r: f64,
    pub k_g: f64,
    pub k_b: f64,
    /// Pre-amplifier (read) noise, electrons.
    pub sigma_read: f64,
    /// Post-amplifier noise, digital counts before the colour coefficient.
    pub sigma_adc: f64,
    /// Offset added by the firmware. Only used when converting files.
    pub black_level: f64,
    /// Largest recordable black-level-subtracted value.
    pub saturation: f64,
    pub bit_depth: u32,
    /// Scale applied to both static noise standard deviations.
    pub static_noise_multiplier: f64,
}

/// Saturation of the 14-bit rescaled value range used by the shipped profiles.
pub const SATURATION_14BIT: f64 = 16383.0;

impl CameraNoiseParams {
    #[allow(clippy::too_many_arguments)]
    fn table_profile(name: &str, k_r: f64, k_g: f64, k_b: f64, sigma_read: f64, sigma_adc: f64) -> Self {
        CameraNoiseParams {
            name: name.into(),
            k_r,
            k_g,
            k_b,
            sigma_read,
            sigma_adc,
            black_level: 0.0,
            saturation: SATURATION_14BIT,
            bit_depth: 14,
            static_noise_multiplier: 1.0,
        }
    }

    pub fn sony_a7r1() -> Self {
        Self::table_profile("Sony a7r1", 0.327, 0.33, 0.32, 0.7, 0.04)
    }

    pub fn sony_a7r3() -> Self {
        Self::table_profile("Sony a7r3", 0.422, 0.384, 0.389, 0.705, 3.028)
    }

    pub fn canon_t1i() -> Self {
        Self::table_profile("Canon T1i", 1.363, 1.183, 1.153, 0.928, 5.005)
    }

    pub fn sony_imx345() -> Self {
        Self::table_profile("Sony IMX345", 0.303, 0.313, 0.321, 1.063, 2.373)
    }

    /// Unit colour coefficients, no static noise.
    pub fn noiseless(saturation: f64) -> Self {
        CameraNoiseParams {
            name: "noiseless".into(),
            k_r: 1.0,
            k_g: 1.0,
            k_b: 1.0,
            sigma_read: 0.0,
            sigma_adc: 0.0,
            black_level: 0.0,
            saturation,
            bit_depth: 14,
            static_noise_multiplier: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !(positive(self.k_r) && positive(self.k_g) && positive(self.k_b)) {
            return Err(Error::InvalidParams("colour coefficients must be positive"));
        }
        if !(self.sigma_read >= 0.0 && self.sigma_read.is_finite()) {
            return Err(Error::InvalidParams("sigma_read must be non-negative"));
        }
        if !(self.sigma_adc >= 0.0 && self.sigma_adc.is_finite()) {
            return Err(Error::InvalidParams("sigma_adc must be non-negative"));
        }
        // infinite saturation is allowed: it disables clipping
        if !(self.saturation > 0.0) {
            return Err(Error::InvalidParams("saturation must be positive"));
        }
        if !(self.static_noise_multiplier >= 0.0 && self.static_noise_multiplier.is_finite()) {
            return Err(Error::InvalidParams("static noise multiplier must be non-negative"));
        }
        Ok(())
    }

    #[inline]
    pub fn k(&self, ch: ChannelId) -> f64 {
        match ch {
            ChannelId::R => self.k_r,
            ChannelId::G => self.k_g,
            ChannelId::B => self.k_b,
        }
    }

    pub fn set_k(&mut self, ch: ChannelId, value: f64) {
        match ch {
            ChannelId::R => self.k_r = value,
            ChannelId::G => self.k_g = value,
            ChannelId::B => self.k_b = value,
        }
    }

    pub fn with_static_multiplier(mut self, m: f64) -> Self {
        self.static_noise_multiplier = m;
        self
    }

    #[inline]
    fn effective_sigmas(&self) -> (f64, f64) {
        let m = self.static_noise_multiplier;
        (m * self.sigma_read, m * self.sigma_adc)
    }

    /// Signal-independent variance of a RAW value, in squared counts.
    #[inline]
    pub fn static_variance(&self, meta: ExposureMeta, ch: ChannelId) -> f64 {
        let (read, adc) = self.effective_sigmas();
        let k = self.k(ch);
        read * read * meta.g * meta.g * k * k + adc * adc * k * k
    }

    /// Signal-independent variance in relative radiance units.
    #[inline]
    pub fn static_scaled_variance(&self, meta: ExposureMeta) -> f64 {
        let (read, adc) = self.effective_sigmas();
        let t2 = meta.t * meta.t;
        read * read / t2 + adc * adc / (t2 * meta.g * meta.g)
    }
}

fn check_phi(phi: f64) -> Result<()> {
    if phi >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeRadiance(phi))
    }
}

/// Expected RAW value `phi t g k_c`.
pub fn pixel_mean(phi: f64, meta: ExposureMeta, params: &CameraNoiseParams, ch: ChannelId) -> Result<f64> {
    check_phi(phi)?;
    Ok(phi * meta.t * meta.g * params.k(ch))
}

/// Variance of the RAW value: photon term plus static term.
pub fn pixel_variance(phi: f64, meta: ExposureMeta, params: &CameraNoiseParams, ch: ChannelId) -> Result<f64> {
    check_phi(phi)?;
    let k = params.k(ch);
    let photon = phi * meta.t * meta.g * meta.g * k * k;
    Ok(photon + params.static_variance(meta, ch))
}

/// Variance of the relative radiance `x = y / (t g k_c)`:
/// `phi / t + m^2 (sigma_read^2 / t^2 + sigma_adc^2 / (t^2 g^2))`.
pub fn scaled_variance(phi: f64, meta: ExposureMeta, params: &CameraNoiseParams) -> Result<f64> {
    check_phi(phi)?;
    meta.validate()?;
    Ok(scaled_variance_unchecked(phi, meta, params))
}

/// [`scaled_variance`] without argument checks. `phi` may be negative, which
/// is what plug-in estimators need.
#[inline]
pub fn scaled_variance_unchecked(phi: f64, meta: ExposureMeta, params: &CameraNoiseParams) -> f64 {
    phi / meta.t + params.static_scaled_variance(meta)
}

/// Draws a photon count with mean `lambda`.
///
/// Exact Poisson sampling below [`POISSON_NORMAL_THRESHOLD`], a rounded normal
/// approximation above it.
pub fn sample_photons<R: RngCore + ?Sized>(lambda: f64, rng: &mut R) -> f64 {
    if !(lambda > 0.0) {
        return 0.0;
    }
    if lambda < POISSON_NORMAL_THRESHOLD {
        // lambda is positive and finite here
        match Poisson::new(lambda) {
            Ok(dist) => dist.sample(rng),
            Err(_) => lambda,
        }
    } else {
        let z: f64 = StandardNormal.sample(rng);
        math::round(lambda + math::sqrt(lambda) * z).max(0.0)
    }
}

/// Draws one black-level-free RAW value, clipped at the saturation point.
pub fn sample_raw<R: RngCore + ?Sized>(
    phi: f64,
    meta: ExposureMeta,
    params: &CameraNoiseParams,
    ch: ChannelId,
    rng: &mut R,
) -> Result<f64> {
    sample_raw_with(phi, meta, params, ch, PhotonDraw::Poisson, rng)
}

pub fn sample_raw_with<R: RngCore + ?Sized>(
    phi: f64,
    meta: ExposureMeta,
    params: &CameraNoiseParams,
    ch: ChannelId,
    photons: PhotonDraw,
    rng: &mut R,
) -> Result<f64> {
    check_phi(phi)?;
    let k = params.k(ch);
    let lambda = phi * meta.t;
    let count = match photons {
        PhotonDraw::Poisson => sample_photons(lambda, rng),
        PhotonDraw::Expected => lambda,
    };
    let (read, adc) = params.effective_sigmas();
    let z_read: f64 = StandardNormal.sample(rng);
    let z_adc: f64 = StandardNormal.sample(rng);
    let y = count * meta.g * k + read * z_read * meta.g * k + adc * z_adc * k;
    Ok(y.min(params.saturation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn unit() -> ExposureMeta {
        ExposureMeta { t: 1.0, g: 1.0 }
    }

    #[test]
    fn mean_examples() {
        let a7r3 = CameraNoiseParams::sony_a7r3();
        assert_eq!(pixel_mean(0.0, ExposureMeta { t: 0.25, g: 3.0 }, &a7r3, ChannelId::R).unwrap(), 0.0);
        let m = pixel_mean(100.0, ExposureMeta { t: 1.0, g: 8.0 }, &a7r3, ChannelId::G).unwrap();
        assert_relative_eq!(m, 307.2, max_relative = 1e-12);
        let ident = CameraNoiseParams::noiseless(SATURATION_14BIT);
        assert_eq!(pixel_mean(1.0, unit(), &ident, ChannelId::B).unwrap(), 1.0);
    }

    #[test]
    fn negative_radiance_is_rejected() {
        let p = CameraNoiseParams::sony_a7r3();
        assert_eq!(pixel_mean(-1.0, unit(), &p, ChannelId::G), Err(Error::NegativeRadiance(-1.0)));
        assert!(pixel_variance(-0.5, unit(), &p, ChannelId::G).is_err());
        assert!(scaled_variance(-0.5, unit(), &p).is_err());
        let mut rng = stream(1, &[]);
        assert!(sample_raw(-2.0, unit(), &p, ChannelId::G, &mut rng).is_err());
    }

    #[test]
    fn variance_examples() {
        let quiet = CameraNoiseParams::noiseless(SATURATION_14BIT);
        assert_eq!(pixel_variance(0.0, unit(), &quiet, ChannelId::G).unwrap(), 0.0);

        let a7r3 = CameraNoiseParams::sony_a7r3();
        let v = pixel_variance(1000.0, unit(), &a7r3, ChannelId::G).unwrap();
        // 1000 * 0.384^2 + (0.705^2 + 3.028^2) * 0.384^2
        assert_relative_eq!(v, 148.881_281_531_904, max_relative = 1e-9);

        let meta = ExposureMeta { t: 0.5, g: 4.0 };
        let v1 = pixel_variance(10.0, meta, &a7r3, ChannelId::R).unwrap();
        let v2 = pixel_variance(10.0, meta, &a7r3.clone().with_static_multiplier(2.0), ChannelId::R).unwrap();
        let k = a7r3.k_r;
        let static1 = 0.705f64.powi(2) * 16.0 * k * k + 3.028f64.powi(2) * k * k;
        assert_relative_eq!(v2 - v1, 3.0 * static1, max_relative = 1e-12);
    }

    #[test]
    fn scaled_variance_examples() {
        let quiet = CameraNoiseParams::noiseless(SATURATION_14BIT);
        let meta = ExposureMeta { t: 0.125, g: 2.0 };
        assert_eq!(scaled_variance(40.0, meta, &quiet).unwrap(), 40.0 / 0.125);

        let a7r3 = CameraNoiseParams::sony_a7r3();
        let v = scaled_variance(0.0, unit(), &a7r3).unwrap();
        assert_relative_eq!(v, 0.705 * 0.705 + 3.028 * 3.028, max_relative = 1e-12);
        assert_abs_diff_eq!(v, 9.667, epsilon = 2e-3);

        assert!(scaled_variance(1.0, ExposureMeta { t: 0.0, g: 1.0 }, &a7r3).is_err());
        assert!(scaled_variance(1.0, ExposureMeta { t: 1.0, g: 0.0 }, &a7r3).is_err());
    }

    #[test]
    fn degenerate_sampler_returns_zero() {
        let quiet = CameraNoiseParams::noiseless(SATURATION_14BIT);
        let mut rng = stream(7, &[1]);
        for _ in 0..1000 {
            assert_eq!(sample_raw(0.0, unit(), &quiet, ChannelId::G, &mut rng).unwrap(), 0.0);
        }
    }

    #[test]
    fn sampler_clips_at_saturation() {
        let p = CameraNoiseParams::sony_a7r3();
        let mut rng = stream(3, &[]);
        let meta = ExposureMeta { t: 1.0, g: 8.0 };
        for _ in 0..1000 {
            let y = sample_raw(1.0e5, meta, &p, ChannelId::G, &mut rng).unwrap();
            assert_eq!(y, p.saturation);
        }
    }

    #[test]
    fn negative_samples_are_kept() {
        let p = CameraNoiseParams::canon_t1i();
        let mut rng = stream(11, &[]);
        let meta = ExposureMeta { t: 1.0, g: 8.0 };
        let negatives = (0..1000)
            .filter(|_| sample_raw(0.0, meta, &p, ChannelId::G, &mut rng).unwrap() < 0.0)
            .count();
        assert!(negatives > 300, "{negatives}");
    }

    fn moments(samples: impl Iterator<Item = f64>) -> (f64, f64, usize) {
        let v: std::vec::Vec<f64> = samples.collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var, v.len())
    }

    #[test]
    fn sample_mean_near_expectation() {
        // phi=100, t=1, g=8, k=0.33 -> 264
        let p = CameraNoiseParams::sony_a7r1();
        let meta = ExposureMeta { t: 1.0, g: 8.0 };
        let mut rng = stream(2024, &[0]);
        let (mean, var, n) = moments((0..1_000_000).map(|_| sample_raw(100.0, meta, &p, ChannelId::G, &mut rng).unwrap()));
        let expected = pixel_mean(100.0, meta, &p, ChannelId::G).unwrap();
        assert_relative_eq!(expected, 264.0, max_relative = 1e-12);
        let se = (var / n as f64).sqrt();
        assert!((mean - expected).abs() < 3.0 * se, "mean {mean} vs {expected}, se {se}");
        let model = pixel_variance(100.0, meta, &p, ChannelId::G).unwrap();
        assert!((var / model - 1.0).abs() < 0.01, "var {var} vs {model}");
    }

    #[test]
    fn normal_approximation_branch_moments() {
        // lambda = 5e4 exercises the rounded normal branch
        let mut p = CameraNoiseParams::sony_a7r3();
        p.saturation = f64::INFINITY;
        let meta = ExposureMeta { t: 0.5, g: 1.0 };
        let mut rng = stream(5, &[]);
        let (mean, var, n) = moments((0..400_000).map(|_| sample_raw(1.0e5, meta, &p, ChannelId::B, &mut rng).unwrap()));
        let expected = pixel_mean(1.0e5, meta, &p, ChannelId::B).unwrap();
        let model = pixel_variance(1.0e5, meta, &p, ChannelId::B).unwrap();
        assert!((mean - expected).abs() < 4.0 * (var / n as f64).sqrt());
        assert!((var / model - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn expected_photon_draw_is_deterministic_without_static_noise() {
        let quiet = CameraNoiseParams::noiseless(f64::INFINITY);
        let mut rng = stream(1, &[]);
        let meta = ExposureMeta { t: 0.25, g: 2.0 };
        let y = sample_raw_with(13.0, meta, &quiet, ChannelId::G, PhotonDraw::Expected, &mut rng).unwrap();
        assert_eq!(y, 13.0 * 0.25 * 2.0);
    }

    #[test]
    fn profiles_validate() {
        for p in [
            CameraNoiseParams::sony_a7r1(),
            CameraNoiseParams::sony_a7r3(),
            CameraNoiseParams::canon_t1i(),
            CameraNoiseParams::sony_imx345(),
        ] {
            p.validate().unwrap();
        }
        let mut bad = CameraNoiseParams::sony_a7r3();
        bad.k_g = 0.0;
        assert!(bad.validate().is_err());
        bad = CameraNoiseParams::sony_a7r3();
        bad.sigma_adc = -1.0;
        assert!(bad.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn camera() -> impl Strategy<Value = CameraNoiseParams> {
            (0.05f64..3.0, 0.0f64..5.0, 0.0f64..10.0, 0.0f64..8.0).prop_map(|(k, read, adc, m)| {
                let mut p = CameraNoiseParams::noiseless(SATURATION_14BIT);
                p.k_r = k;
                p.k_g = k * 1.1;
                p.k_b = k * 0.9;
                p.sigma_read = read;
                p.sigma_adc = adc;
                p.static_noise_multiplier = m;
                p
            })
        }

        proptest! {
            #[test]
            fn photon_term_is_linear(phi in 0.0f64..1e7, t in 1e-4f64..10.0, g in 0.1f64..64.0, p in camera()) {
                let meta = ExposureMeta { t, g };
                let v = pixel_variance(phi, meta, &p, ChannelId::G).unwrap();
                let v0 = pixel_variance(0.0, meta, &p, ChannelId::G).unwrap();
                let photon = phi * t * g * g * p.k_g * p.k_g;
                prop_assert!(((v - v0) - photon).abs() <= 4.0 * f64::EPSILON * v);
            }

            #[test]
            fn scaled_is_pixel_variance_rescaled(phi in 0.0f64..1e7, t in 1e-4f64..10.0, g in 0.1f64..64.0, p in camera()) {
                let meta = ExposureMeta { t, g };
                let k = p.k_g;
                let scaled = scaled_variance(phi, meta, &p).unwrap();
                let pix = pixel_variance(phi, meta, &p, ChannelId::G).unwrap() / (t * g * k).powi(2);
                prop_assert!((scaled - pix).abs() <= 1e-12 * scaled.max(f64::MIN_POSITIVE));
            }

            #[test]
            fn scaled_variance_decreases_with_time(phi in 1e-3f64..1e7, t in 1e-4f64..10.0, dt in 1e-3f64..10.0, g in 0.1f64..64.0, p in camera()) {
                let a = scaled_variance(phi, ExposureMeta { t, g }, &p).unwrap();
                let b = scaled_variance(phi, ExposureMeta { t: t * (1.0 + dt), g }, &p).unwrap();
                prop_assert!(b < a);
            }

            #[test]
            fn samples_never_exceed_saturation(phi in 0.0f64..1e8, t in 1e-4f64..4.0, g in 0.1f64..64.0, p in camera(), seed in any::<u64>()) {
                let mut rng = stream(seed, &[]);
                let y = sample_raw(phi, ExposureMeta { t, g }, &p, ChannelId::R, &mut rng).unwrap();
                prop_assert!(y <= p.saturation);
            }
        }
    }
}
