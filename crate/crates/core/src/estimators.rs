//! Per-pixel radiance estimators.
//!
//! Every estimator works on a slice of [`Observation`]s, one per exposure,
//! already converted to relative radiance `x = y / (t g k_c)`. Observations
//! flagged as saturated are ignored; if nothing else is left the estimators
//! return [`Error::Saturated`].
//!
//! Sums over observations always run in slice order, so results are
//! bit-reproducible.

use core::fmt;
use core::str::FromStr;

use crate::math;
use crate::noise::{scaled_variance_unchecked, CameraNoiseParams, ExposureMeta};
use crate::optimize::GoldenSection;
use crate::{Error, Result};

/// Weight used in place of `1 / sigma^2` when the plug-in variance is not
/// positive.
pub const WEIGHT_FLOOR: f64 = 1e-10;

/// One exposure's reading of a pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// Relative radiance `y / (t g k_c)`. May be negative.
    pub x: f64,
    pub t: f64,
    pub g: f64,
    pub saturated: bool,
}

impl Observation {
    pub fn new(x: f64, t: f64, g: f64) -> Self {
        Observation { x, t, g, saturated: false }
    }

    /// Converts a black-level-subtracted RAW value. Values at or above
    /// `saturation` are flagged.
    pub fn from_raw(y: f64, meta: ExposureMeta, k: f64, saturation: f64) -> Self {
        Observation { x: y / (meta.t * meta.g * k), t: meta.t, g: meta.g, saturated: y >= saturation }
    }

    #[inline]
    pub fn meta(&self) -> ExposureMeta {
        ExposureMeta { t: self.t, g: self.g }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    Uniform,
    HatShaped,
    VarianceWeighted,
    IterativeEM,
    FullMLE,
    NPNE,
    PPNE,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 7] = [
        EstimatorKind::Uniform,
        EstimatorKind::HatShaped,
        EstimatorKind::VarianceWeighted,
        EstimatorKind::IterativeEM,
        EstimatorKind::FullMLE,
        EstimatorKind::NPNE,
        EstimatorKind::PPNE,
    ];

    /// Short name used on the command line and in reports.
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Uniform => "uniform",
            EstimatorKind::HatShaped => "hat",
            EstimatorKind::VarianceWeighted => "var",
            EstimatorKind::IterativeEM => "em",
            EstimatorKind::FullMLE => "mle",
            EstimatorKind::NPNE => "npne",
            EstimatorKind::PPNE => "ppne",
        }
    }

    /// Whether the estimator needs the camera's static noise parameters.
    pub fn requires_noise_params(self) -> bool {
        matches!(self, EstimatorKind::VarianceWeighted | EstimatorKind::IterativeEM | EstimatorKind::FullMLE)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or(Error::InvalidConfig("unknown estimator (expected uniform, hat, var, em, mle, npne or ppne)"))
    }
}

/// Parameters of the hat-shaped weighting function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HatParams {
    /// Exponent of the gamma curve standing in for the camera response.
    pub gamma: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub epsilon: f64,
}

impl Default for HatParams {
    fn default() -> Self {
        HatParams { gamma: 2.2, y_min: 0.0, y_max: crate::noise::SATURATION_14BIT, epsilon: 1e-10 }
    }
}

impl HatParams {
    pub fn for_saturation(saturation: f64) -> Self {
        HatParams { y_max: saturation, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidConfig("hat gamma must be positive"));
        }
        if !(self.y_min >= 0.0 && self.y_min < self.y_max && self.y_max.is_finite()) {
            return Err(Error::InvalidConfig("hat range needs 0 <= y_min < y_max"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("hat epsilon must be positive"));
        }
        Ok(())
    }
}

fn usable(obs: &[Observation]) -> impl Iterator<Item = &Observation> + Clone {
    obs.iter().filter(|o| !o.saturated)
}

fn check_usable(obs: &[Observation]) -> Result<usize> {
    if obs.is_empty() {
        return Err(Error::NoObservations);
    }
    match usable(obs).count() {
        0 => Err(Error::Saturated),
        n => Ok(n),
    }
}

fn weighted_mean<'a>(pairs: impl Iterator<Item = (f64, &'a Observation)>) -> f64 {
    let (num, den) = pairs.fold((0.0, 0.0), |(num, den), (w, o)| (num + w * o.x, den + w));
    num / den
}

/// Arithmetic mean of the unsaturated observations.
pub fn estimate_uniform(obs: &[Observation]) -> Result<f64> {
    let n = check_usable(obs)?;
    Ok(usable(obs).map(|o| o.x).sum::<f64>() / n as f64)
}

/// Hat-shaped weight of a RAW value, computed on `y^(1/gamma)`. Values
/// outside `[y_min, y_max]` (including negative readings) are clamped first
/// and therefore get the floor weight `epsilon`.
pub fn hat_weight(y: f64, hp: &HatParams) -> f64 {
    let inv_gamma = 1.0 / hp.gamma;
    let lo = math::powf(hp.y_min, inv_gamma);
    let hi = math::powf(hp.y_max, inv_gamma);
    let u = math::powf(y.clamp(hp.y_min, hp.y_max), inv_gamma);
    if u <= 0.5 * (lo + hi) {
        u - lo + hp.epsilon
    } else {
        hi - u + hp.epsilon
    }
}

/// Weighted mean with hat-shaped weights of the RAW values `raw[i]` paired
/// with `obs[i]`.
pub fn estimate_hat(obs: &[Observation], raw: &[f64], hp: &HatParams) -> Result<f64> {
    if obs.len() != raw.len() {
        return Err(Error::LengthMismatch { left: obs.len(), right: raw.len() });
    }
    check_usable(obs)?;
    Ok(weighted_mean(obs.iter().zip(raw).filter(|(o, _)| !o.saturated).map(|(o, &y)| (hat_weight(y, hp), o))))
}

/// Variance of `x_i` with the single observation plugged in for the
/// radiance. Can be zero or negative for negative readings.
#[inline]
pub fn plugin_variance(o: &Observation, params: &CameraNoiseParams) -> f64 {
    scaled_variance_unchecked(o.x, o.meta(), params)
}

#[inline]
fn inverse_variance_weight(var: f64) -> f64 {
    if var > 0.0 {
        1.0 / var
    } else {
        WEIGHT_FLOOR
    }
}

/// Inverse-variance weighted mean using each observation's plug-in variance.
/// The variance of relative radiance does not depend on the colour
/// coefficient, so no channel is needed.
pub fn estimate_variance_weighted(obs: &[Observation], params: &CameraNoiseParams) -> Result<f64> {
    check_usable(obs)?;
    Ok(weighted_mean(usable(obs).map(|o| (inverse_variance_weight(plugin_variance(o, params)), o))))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    /// Relative change below which the iteration stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions { tol: 1e-6, max_iter: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOutcome {
    pub estimate: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Alternates between model variances at the current estimate and the
/// inverse-variance weighted mean, starting from the mean of `x`.
pub fn estimate_em(obs: &[Observation], params: &CameraNoiseParams, opts: &EmOptions) -> Result<EmOutcome> {
    let mut phi = estimate_uniform(obs)?;
    for iteration in 1..=opts.max_iter {
        let clamped = phi.max(0.0);
        let next = weighted_mean(usable(obs).map(|o| (inverse_variance_weight(scaled_variance_unchecked(clamped, o.meta(), params)), o)));
        let done = (next - phi).abs() <= opts.tol * phi.abs().max(1.0);
        phi = next;
        if done {
            return Ok(EmOutcome { estimate: phi, iterations: iteration, converged: true });
        }
    }
    Ok(EmOutcome { estimate: phi, iterations: opts.max_iter, converged: false })
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Normal-approximation log-likelihood of radiance `phi` with the model
/// variance of each observation evaluated at `phi`.
pub fn normal_log_likelihood(phi: f64, obs: &[Observation], params: &CameraNoiseParams) -> f64 {
    usable(obs)
        .map(|o| {
            let var = scaled_variance_unchecked(phi, o.meta(), params);
            if var > 0.0 {
                let r = o.x - phi;
                -0.5 * (LN_2PI + math::ln(var)) - r * r / (2.0 * var)
            } else if o.x == phi {
                // degenerate point mass
                0.0
            } else {
                f64::NEG_INFINITY
            }
        })
        .sum()
}

/// Maximizer of [`normal_log_likelihood`] over `phi >= 0` found by
/// golden-section search on `[0, 4 max(x) + 10 sqrt(max static variance)]`.
pub fn estimate_full_mle(obs: &[Observation], params: &CameraNoiseParams) -> Result<f64> {
    estimate_full_mle_with(obs, params, &GoldenSection::default())
}

pub fn estimate_full_mle_with(obs: &[Observation], params: &CameraNoiseParams, search: &GoldenSection) -> Result<f64> {
    check_usable(obs)?;
    let max_x = usable(obs).map(|o| o.x).fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let max_static = usable(obs).map(|o| params.static_scaled_variance(o.meta())).fold(0.0, f64::max);
    let hi = 4.0 * max_x + 10.0 * math::sqrt(max_static);
    if !(hi > 0.0) {
        return Ok(0.0);
    }
    let search = GoldenSection { abs_tol: search.abs_tol.max(hi * 1e-13), ..*search };
    Ok(search.maximize(|phi| normal_log_likelihood(phi, obs, params), 0.0, hi).x)
}

/// Closed-form maximizer of the normal likelihood without static noise:
/// `(sqrt(sum(x^2 t) sum(t) + N^2) - N) / sum(t)`.
pub fn estimate_npne(obs: &[Observation]) -> Result<f64> {
    let n = check_usable(obs)? as f64;
    let (sxxt, st) = usable(obs).fold((0.0, 0.0), |(a, b), o| (a + o.x * o.x * o.t, b + o.t));
    Ok((math::sqrt(sxxt * st + n * n) - n) / st)
}

/// Exposure-time weighted mean `sum(x t) / sum(t)`, the maximizer of the
/// Poisson likelihood without static noise.
pub fn estimate_ppne(obs: &[Observation]) -> Result<f64> {
    check_usable(obs)?;
    Ok(weighted_mean(usable(obs).map(|o| (o.t, o))))
}

/// Everything an estimator may need beyond the observations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EstimatorSettings {
    pub hat: HatParams,
    pub em: EmOptions,
    pub mle: GoldenSection,
}

/// Runs estimator `kind`. `raw` holds the RAW values paired with `obs` and is
/// only read by the hat-shaped estimator.
pub fn estimate(
    kind: EstimatorKind,
    obs: &[Observation],
    raw: &[f64],
    params: Option<&CameraNoiseParams>,
    settings: &EstimatorSettings,
) -> Result<f64> {
    let need = || params.ok_or(Error::MissingParams(kind));
    match kind {
        EstimatorKind::Uniform => estimate_uniform(obs),
        EstimatorKind::HatShaped => estimate_hat(obs, raw, &settings.hat),
        EstimatorKind::VarianceWeighted => estimate_variance_weighted(obs, need()?),
        EstimatorKind::IterativeEM => estimate_em(obs, need()?, &settings.em).map(|o| o.estimate),
        EstimatorKind::FullMLE => estimate_full_mle_with(obs, need()?, &settings.mle),
        EstimatorKind::NPNE => estimate_npne(obs),
        EstimatorKind::PPNE => estimate_ppne(obs),
    }
}
