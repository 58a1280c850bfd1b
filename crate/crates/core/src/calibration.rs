//! Noise parameter calibration from patch statistics.
//!
//! Input is a table of (mean, standard deviation) pairs measured on uniform
//! patches at several gains. The fitter recovers the colour coefficients of
//! every channel present plus the shared read and ADC noise by minimizing the
//! squared log ratio between modelled and measured standard deviations with
//! Nelder-Mead in log-parameter space.

use alloc::vec::Vec;

use crate::math;
use crate::noise::{CameraNoiseParams, ChannelId};
use crate::optimize::NelderMead;
use crate::{Error, Result};

/// Minimum number of samples the fit accepts after exclusion.
pub const MIN_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSample {
    /// Mean of the patch, black-level-subtracted counts.
    pub mean: f64,
    /// Sample standard deviation of the patch.
    pub std: f64,
    pub gain: f64,
    pub channel: ChannelId,
    /// Number of pixels the statistics were computed from.
    pub count: u64,
}

impl NoiseSample {
    pub fn snr(&self) -> f64 {
        self.mean / self.std
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: CameraNoiseParams,
    /// RMS of `sigma_model / sigma_measured - 1` over the samples used.
    pub residual: f64,
    /// The same metric at the starting point.
    pub initial_residual: f64,
    pub n_used: usize,
    pub n_excluded: usize,
    pub converged: bool,
    /// Fewer than two distinct gains: read and ADC noise cannot be separated.
    pub single_gain: bool,
}

/// Keeps samples whose SNR `mean / std` is at least one. Order is preserved.
pub fn exclude_low_snr(samples: &[NoiseSample]) -> Vec<NoiseSample> {
    samples.iter().copied().filter(|s| s.snr() >= 1.0).collect()
}

/// Model standard deviation of a patch with measured mean `mean`.
pub fn model_std(mean: f64, gain: f64, params: &CameraNoiseParams, ch: ChannelId) -> f64 {
    let k = params.k(ch);
    let var = mean * gain * k + params.sigma_read * params.sigma_read * gain * gain * k * k + params.sigma_adc * params.sigma_adc * k * k;
    math::sqrt(var.max(0.0))
}

/// Relative standard deviation `sigma / mean` predicted by the model.
pub fn predict_relative_std(mean: f64, gain: f64, params: &CameraNoiseParams, ch: ChannelId) -> Result<f64> {
    if !(mean > 0.0) {
        return Err(Error::InvalidConfig("mean must be positive"));
    }
    Ok(model_std(mean, gain, params, ch) / mean)
}

fn rms_relative_error(samples: &[NoiseSample], params: &CameraNoiseParams) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let ss: f64 = samples
        .iter()
        .map(|s| {
            let r = model_std(s.mean, s.gain, params, s.channel) / s.std - 1.0;
            r * r
        })
        .sum();
    math::sqrt(ss / samples.len() as f64)
}

/// Starting point: colour coefficients from `std^2 / (mean g)` over the
/// brightest decade of each channel, unit read and ADC noise.
fn initial_guess(samples: &[NoiseSample], channels: &[ChannelId]) -> CameraNoiseParams {
    let mut params = CameraNoiseParams::noiseless(crate::noise::SATURATION_14BIT);
    params.name = "calibrated".into();
    params.sigma_read = 1.0;
    params.sigma_adc = 1.0;
    for &ch in channels {
        let brightest = samples.iter().filter(|s| s.channel == ch).map(|s| s.mean).fold(0.0, f64::max);
        let (sum, n) = samples
            .iter()
            .filter(|s| s.channel == ch && s.mean >= brightest / 10.0)
            .fold((0.0, 0usize), |(sum, n), s| (sum + s.std * s.std / (s.mean * s.gain), n + 1));
        if n > 0 && sum > 0.0 {
            params.set_k(ch, sum / n as f64);
        }
    }
    params
}

fn channels_present(samples: &[NoiseSample]) -> Vec<ChannelId> {
    ChannelId::ALL.into_iter().filter(|ch| samples.iter().any(|s| s.channel == *ch)).collect()
}

fn distinct_gains(samples: &[NoiseSample]) -> usize {
    let mut gains: Vec<f64> = samples.iter().map(|s| s.gain).collect();
    gains.sort_by(f64::total_cmp);
    gains.dedup();
    gains.len()
}

fn unpack(theta: &[f64], channels: &[ChannelId], template: &CameraNoiseParams) -> CameraNoiseParams {
    let mut p = template.clone();
    for (ch, v) in channels.iter().zip(theta) {
        p.set_k(*ch, math::exp(*v));
    }
    let n = channels.len();
    p.sigma_read = math::exp(theta[n]);
    p.sigma_adc = math::exp(theta[n + 1]);
    p
}

fn log_loss(samples: &[NoiseSample], params: &CameraNoiseParams) -> f64 {
    samples
        .iter()
        .map(|s| {
            let d = math::ln(model_std(s.mean, s.gain, params, s.channel)) - math::ln(s.std);
            d * d
        })
        .sum()
}

/// Fits the noise parameters. Channels without samples keep the value from
/// `init` (or the starting guess). The returned parameters always have a
/// static noise multiplier of one.
pub fn fit_noise_params(samples: &[NoiseSample], init: Option<&CameraNoiseParams>) -> Result<FitResult> {
    fit_noise_params_with(samples, init, &default_solver())
}

fn default_solver() -> NelderMead {
    NelderMead { initial_step: 0.25, f_tol: 1e-14, x_tol: 1e-7, max_iter: 20_000 }
}

pub fn fit_noise_params_with(samples: &[NoiseSample], init: Option<&CameraNoiseParams>, solver: &NelderMead) -> Result<FitResult> {
    let used: Vec<NoiseSample> = exclude_low_snr(samples)
        .into_iter()
        .filter(|s| s.std > 0.0 && s.std.is_finite() && s.mean.is_finite() && s.gain > 0.0)
        .collect();
    if used.len() < MIN_SAMPLES {
        return Err(Error::InsufficientSamples { needed: MIN_SAMPLES, got: used.len() });
    }
    let channels = channels_present(&used);
    let guess = initial_guess(&used, &channels);
    let start = match init {
        Some(p) => {
            let mut p = p.clone();
            p.static_noise_multiplier = 1.0;
            if !(p.sigma_read > 0.0) {
                p.sigma_read = guess.sigma_read;
            }
            if !(p.sigma_adc > 0.0) {
                p.sigma_adc = guess.sigma_adc;
            }
            p
        }
        None => guess,
    };

    let mut theta0: Vec<f64> = channels.iter().map(|&ch| math::ln(start.k(ch))).collect();
    theta0.push(math::ln(start.sigma_read));
    theta0.push(math::ln(start.sigma_adc));

    let objective = |theta: &[f64]| log_loss(&used, &unpack(theta, &channels, &start));
    let best = solver.minimize_with_restarts(objective, &theta0, 3);
    let params = unpack(&best.x, &channels, &start);

    let single_gain = distinct_gains(&used) < 2;
    Ok(FitResult {
        residual: rms_relative_error(&used, &params),
        initial_residual: rms_relative_error(&used, &start),
        n_used: used.len(),
        n_excluded: samples.len() - used.len(),
        converged: best.converged && !single_gain,
        single_gain,
        params,
    })
}
