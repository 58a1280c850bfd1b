//! Monte Carlo comparison of the estimators.
//!
//! For each radiance on a logarithmic grid, `n_trials` exposure stacks are
//! drawn from the noise model and merged with every selected estimator. The
//! report holds the relative bias and relative standard deviation of each
//! estimator at each radiance.
//!
//! Random draws for (radiance index, trial, ladder entry) come from their own
//! stream, so the estimator selection, trial subsets and work partitioning
//! never change the stacks that are drawn.

use alloc::vec;
use alloc::vec::Vec;

use crate::estimators::{estimate, EmOptions, EstimatorKind, EstimatorSettings, HatParams, Observation};
use crate::image::{ExposureStack, RadianceMap, RawFrame};
use crate::math;
use crate::noise::{sample_raw_with, CameraNoiseParams, ChannelId, ExposureMeta, PhotonDraw};
use crate::rng::stream;
use crate::{Error, Result};

/// The highest radiance on the grid puts the shortest exposure at this
/// fraction of saturation.
pub const TOP_OF_GRID_FILL: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub camera: CameraNoiseParams,
    pub channel: ChannelId,
    pub n_trials: usize,
    pub n_phi: usize,
    pub phi_range_stops: f64,
    pub ladder: Vec<ExposureMeta>,
    pub estimators: Vec<EstimatorKind>,
    /// Multiplier on both static noise standard deviations.
    pub static_multiplier: f64,
    pub seed: u64,
    /// Trials evaluated with the full MLE, which is far slower than the rest.
    pub mle_trials: usize,
    pub photon_draw: PhotonDraw,
    pub em: EmOptions,
    pub gamma: f64,
}

impl McConfig {
    /// Three exposures five stops apart at gain 8, 100 radiance levels over
    /// 24 stops, 10 000 trials, green channel, every estimator but the full
    /// MLE.
    pub fn standard(camera: CameraNoiseParams) -> Self {
        McConfig {
            camera,
            channel: ChannelId::G,
            n_trials: 10_000,
            n_phi: 100,
            phi_range_stops: 24.0,
            ladder: exposure_ladder(3, 5.0, 8.0),
            estimators: EstimatorKind::ALL.into_iter().filter(|k| *k != EstimatorKind::FullMLE).collect(),
            static_multiplier: 1.0,
            seed: 0,
            mle_trials: 1000,
            photon_draw: PhotonDraw::Poisson,
            em: EmOptions::default(),
            gamma: 2.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        if self.n_trials < 1 {
            return Err(Error::InvalidConfig("n_trials must be at least 1"));
        }
        if self.n_phi < 2 {
            return Err(Error::InvalidConfig("n_phi must be at least 2"));
        }
        if !(self.phi_range_stops > 0.0 && self.phi_range_stops.is_finite()) {
            return Err(Error::InvalidConfig("phi range must be a positive number of stops"));
        }
        if self.ladder.is_empty() {
            return Err(Error::InvalidConfig("exposure ladder is empty"));
        }
        for m in &self.ladder {
            m.validate()?;
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidConfig("no estimators selected"));
        }
        if !(self.static_multiplier >= 0.0 && self.static_multiplier.is_finite()) {
            return Err(Error::InvalidConfig("static multiplier must be non-negative"));
        }
        if !self.camera.saturation.is_finite() {
            return Err(Error::InvalidConfig("simulation needs a finite saturation point"));
        }
        HatParams { gamma: self.gamma, ..HatParams::for_saturation(self.camera.saturation) }.validate()
    }

    /// Camera with the configured static noise multiplier applied. Used both
    /// to draw samples and by the noise-aware estimators.
    pub fn effective_camera(&self) -> CameraNoiseParams {
        self.camera.clone().with_static_multiplier(self.static_multiplier)
    }

    fn shortest(&self) -> ExposureMeta {
        *self.ladder.iter().min_by(|a, b| a.scale().total_cmp(&b.scale())).expect("ladder validated non-empty")
    }

    pub fn phi_max(&self) -> f64 {
        TOP_OF_GRID_FILL * self.camera.saturation / (self.shortest().scale() * self.camera.k(self.channel))
    }

    /// Ascending, logarithmically spaced radiance levels.
    pub fn phi_grid(&self) -> Vec<f64> {
        let top = self.phi_max();
        let last = (self.n_phi - 1) as f64;
        (0..self.n_phi).map(|j| top * math::exp2(-self.phi_range_stops * (last - j as f64) / last)).collect()
    }

    /// Radiance at which each ladder entry reaches saturation, in ladder order.
    pub fn saturation_radiances(&self) -> Vec<f64> {
        let k = self.camera.k(self.channel);
        self.ladder.iter().map(|m| self.camera.saturation / (m.scale() * k)).collect()
    }

    pub fn trials_for(&self, kind: EstimatorKind) -> usize {
        if kind == EstimatorKind::FullMLE {
            self.n_trials.min(self.mle_trials)
        } else {
            self.n_trials
        }
    }

    fn settings(&self) -> EstimatorSettings {
        EstimatorSettings {
            hat: HatParams { gamma: self.gamma, ..HatParams::for_saturation(self.camera.saturation) },
            em: self.em,
            ..Default::default()
        }
    }
}

/// `count` exposures at constant gain, each `stops` shorter than the previous,
/// starting at one second.
pub fn exposure_ladder(count: usize, stops: f64, gain: f64) -> Vec<ExposureMeta> {
    (0..count).map(|i| ExposureMeta { t: math::exp2(-stops * i as f64), g: gain }).collect()
}

/// Same expected counts per ladder entry, but with the exposure time fixed at
/// the longest one and the ratios carried by the gain.
pub fn gain_modulation_config(base: &McConfig) -> McConfig {
    let t = base.ladder.iter().map(|m| m.t).fold(f64::NEG_INFINITY, f64::max);
    let ladder = base.ladder.iter().map(|m| ExposureMeta { t, g: m.g * m.t / t }).collect();
    McConfig { ladder, ..base.clone() }
}

pub fn amplify_static_noise(cfg: &McConfig, m: f64) -> Result<McConfig> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidConfig("static noise multiplier must be positive"));
    }
    Ok(McConfig { static_multiplier: m, ..cfg.clone() })
}

/// One simulated exposure stack for a single pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub raw: Vec<f64>,
    pub obs: Vec<Observation>,
}

/// Draws trial `trial` at grid index `phi_index`. `camera` should be
/// [`McConfig::effective_camera`].
pub fn simulate_trial(cfg: &McConfig, camera: &CameraNoiseParams, phi_index: usize, phi: f64, trial: usize) -> Result<Trial> {
    let k = camera.k(cfg.channel);
    let mut raw = Vec::with_capacity(cfg.ladder.len());
    let mut obs = Vec::with_capacity(cfg.ladder.len());
    for (i, &meta) in cfg.ladder.iter().enumerate() {
        let mut rng = stream(cfg.seed, &[phi_index as u64, trial as u64, i as u64]);
        let y = sample_raw_with(phi, meta, camera, cfg.channel, cfg.photon_draw, &mut rng)?;
        raw.push(y);
        obs.push(Observation::from_raw(y, meta, k, camera.saturation));
    }
    Ok(Trial { raw, obs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRow {
    pub estimator: EstimatorKind,
    pub phi: f64,
    pub relative_bias: f64,
    pub relative_std: f64,
    pub n_trials: usize,
}

impl McRow {
    /// Standard error of `relative_bias`.
    pub fn bias_se(&self) -> f64 {
        self.relative_std / math::sqrt(self.n_trials as f64)
    }

    /// Approximate standard error of `relative_std` (normal theory).
    pub fn std_se(&self) -> f64 {
        self.relative_std / math::sqrt(2.0 * (self.n_trials.max(2) - 1) as f64)
    }
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Mean and sample standard deviation.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    (mean, math::sqrt(ss / (n - 1.0)))
}

/// Rows for one grid level, one per selected estimator in configuration
/// order. Pure in `(cfg, phi_index)`.
pub fn simulate_level(cfg: &McConfig, phi_index: usize) -> Result<Vec<McRow>> {
    let phi = cfg.phi_grid()[phi_index];
    let camera = cfg.effective_camera();
    let settings = cfg.settings();
    let k = camera.k(cfg.channel);
    let shortest = cfg.shortest();
    let clip = camera.saturation / (shortest.scale() * k);

    let mut estimates: Vec<Vec<f64>> = cfg.estimators.iter().map(|&kind| Vec::with_capacity(cfg.trials_for(kind))).collect();
    for trial in 0..cfg.n_trials {
        let draw = simulate_trial(cfg, &camera, phi_index, phi, trial)?;
        for (slot, &kind) in estimates.iter_mut().zip(&cfg.estimators) {
            if trial >= cfg.trials_for(kind) {
                continue;
            }
            let v = match estimate(kind, &draw.obs, &draw.raw, Some(&camera), &settings) {
                Ok(v) => v,
                Err(Error::Saturated) => clip,
                Err(e) => return Err(e),
            };
            slot.push(v);
        }
    }
    Ok(cfg
        .estimators
        .iter()
        .zip(&estimates)
        .map(|(&estimator, values)| {
            let (mean, std) = mean_std(values);
            McRow { estimator, phi, relative_bias: (mean - phi) / phi, relative_std: std / phi, n_trials: values.len() }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub config: McConfig,
    /// Grouped by estimator (configuration order), radiance ascending.
    pub rows: Vec<McRow>,
}

impl McReport {
    /// Assembles a report from per-level rows given in grid order.
    pub fn from_levels(config: McConfig, levels: Vec<Vec<McRow>>) -> Self {
        let mut rows = Vec::with_capacity(levels.len() * config.estimators.len());
        for (e, _) in config.estimators.iter().enumerate() {
            rows.extend(levels.iter().map(|level| level[e].clone()));
        }
        McReport { config, rows }
    }

    /// Rows of one estimator, radiance ascending.
    pub fn curve(&self, kind: EstimatorKind) -> Vec<&McRow> {
        self.rows.iter().filter(|r| r.estimator == kind).collect()
    }
}

/// Runs the whole grid sequentially.
pub fn run_mc(cfg: &McConfig) -> Result<McReport> {
    cfg.validate()?;
    let levels = (0..cfg.n_phi).map(|j| simulate_level(cfg, j)).collect::<Result<Vec<_>>>()?;
    Ok(McReport::from_levels(cfg.clone(), levels))
}

/// Draws one frame per ladder entry from a radiance image. Each sample has
/// its own random stream keyed by (frame, pixel, channel).
pub fn synth_stack(phi_image: &RadianceMap, ladder: &[ExposureMeta], params: &CameraNoiseParams, seed: u64) -> Result<ExposureStack> {
    phi_image.validate()?;
    params.validate()?;
    if ladder.is_empty() {
        return Err(Error::EmptyStack);
    }
    if let Some(&bad) = phi_image.data.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::NegativeRadiance(bad as f64));
    }
    let nc = phi_image.channels.len();
    let mut frames = Vec::with_capacity(ladder.len());
    for (f, &meta) in ladder.iter().enumerate() {
        meta.validate()?;
        let mut data = vec![0.0f32; phi_image.data.len()];
        for (i, (out, &phi)) in data.iter_mut().zip(&phi_image.data).enumerate() {
            let (pixel, c) = (i / nc, i % nc);
            let mut rng = stream(seed, &[f as u64, pixel as u64, c as u64]);
            let y = sample_raw_with(phi as f64, meta, params, phi_image.channels[c], PhotonDraw::Poisson, &mut rng)?;
            *out = y as f32;
        }
        frames.push(RawFrame::new(phi_image.width, phi_image.height, phi_image.channels.clone(), data, meta, params.saturation)?);
    }
    ExposureStack::new(frames, Some(params.clone()))
}
