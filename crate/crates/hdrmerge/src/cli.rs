//! Command-line front end.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use hdrmerge_core::calibration::{fit_noise_params, predict_relative_std};
use hdrmerge_core::estimators::{EstimatorKind, HatParams};
use hdrmerge_core::simulator::{amplify_static_noise, gain_modulation_config, synth_stack, McConfig};
use hdrmerge_core::{CameraNoiseParams, ChannelId, ExposureMeta, ExposureStack, RadianceMap};

use crate::error::Error;
use crate::frame::{read_map, read_stack, write_frame, write_map};
use crate::parallel::{merge_parallel, run_mc_parallel, with_threads};
use crate::profile::{read_profile, write_profile};
use crate::report::write_report;
use crate::samples::read_samples;
use crate::sidecar::KeyValues;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_MISSING_PROFILE: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Debug)]
pub enum Failure {
    Input(String),
    MissingProfile(String),
    NotConverged(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => EXIT_INPUT,
            Failure::MissingProfile(_) => EXIT_MISSING_PROFILE,
            Failure::NotConverged(_) => EXIT_NOT_CONVERGED,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::MissingProfile(m) | Failure::NotConverged(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<hdrmerge_core::Error> for Failure {
    fn from(e: hdrmerge_core::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Debug, Parser)]
#[command(name = "hdrmerge", version, about = "Noise-aware merging of RAW exposure stacks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Merge an exposure stack into a relative radiance map
    Merge(MergeArgs),
    /// Draw a synthetic exposure stack from the noise model
    Simulate(SimulateArgs),
    /// Monte Carlo bias and spread of the estimators
    McBench(McBenchArgs),
    /// Fit camera noise parameters to patch statistics
    Calibrate(CalibrateArgs),
    /// Tabulate the relative noise predicted by a profile
    NoiseCurve(NoiseCurveArgs),
}

fn parse_estimator(s: &str) -> Result<EstimatorKind, String> {
    s.parse().map_err(|e: hdrmerge_core::Error| e.to_string())
}

fn parse_channel(s: &str) -> Result<ChannelId, String> {
    s.parse().map_err(|e: hdrmerge_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    /// Input frames (portable float maps with `.meta` sidecars)
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// uniform, hat, var, em, mle, npne or ppne
    #[arg(long, default_value = "ppne", value_parser = parse_estimator)]
    pub estimator: EstimatorKind,
    /// Camera profile; required by var, em and mle
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Write negative radiance as zero
    #[arg(long)]
    pub clamp_negative: bool,
    /// Worker threads (0: one per core)
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Exponent of the hat estimator's response curve
    #[arg(long, default_value_t = 2.2)]
    pub gamma: f64,
    /// Accepted for uniformity; merging draws no random numbers
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override the black level from the sidecars
    #[arg(long)]
    pub black_level: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LadderKind {
    /// Exposure times differ, gain fixed
    Exposure,
    /// Exposure time fixed, gains differ by the same ratios
    Gain,
}

#[derive(Debug, Args)]
pub struct McBenchArgs {
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// `key=value` file; the `.config` written next to a report works
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Stacks per radiance level [default: 10000]
    #[arg(long)]
    pub trials: Option<usize>,
    /// Radiance levels [default: 100]
    #[arg(long)]
    pub phi_steps: Option<usize>,
    /// Width of the radiance grid in stops [default: 24]
    #[arg(long)]
    pub stops: Option<f64>,
    /// [default: exposure]
    #[arg(long, value_enum)]
    pub ladder: Option<LadderKind>,
    /// Multiplier on the static noise [default: 1]
    #[arg(long)]
    pub static_mult: Option<f64>,
    /// Comma-separated estimator names [default: all but mle]
    #[arg(long)]
    pub estimators: Option<String>,
    /// Stacks per level for mle [default: 1000]
    #[arg(long)]
    pub mle_trials: Option<usize>,
    /// [default: G]
    #[arg(long, value_parser = parse_channel)]
    pub channel: Option<ChannelId>,
    #[arg(long)]
    pub out: PathBuf,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0: one per core)
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("radiance").required(true).args(["phi", "phi_map"])))]
pub struct SimulateArgs {
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// Constant radiance
    #[arg(long)]
    pub phi: Option<f64>,
    /// Radiance image (portable float map)
    #[arg(long)]
    pub phi_map: Option<PathBuf>,
    /// Width of the constant image
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    /// Height of the constant image
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    /// Channels of the constant image, comma-separated
    #[arg(long, default_value = "G")]
    pub channels: String,
    /// Exposures as `t:g` pairs
    #[arg(long, default_value = "1:8,0.03125:8,0.0009765625:8")]
    pub ladder_spec: String,
    /// Frame i is written to `<prefix>_<i>.pfm`
    #[arg(long)]
    pub out_prefix: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// CSV with columns mean,std,gain,channel,count
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Starting profile; also supplies name and saturation
    #[arg(long)]
    pub init: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NoiseCurveArgs {
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// Comma-separated gains
    #[arg(long, default_value = "1")]
    pub gains: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Means per curve, log-spaced from 1 to saturation
    #[arg(long, default_value_t = 64)]
    pub points: usize,
    #[arg(long, default_value = "R,G,B")]
    pub channels: String,
}

pub fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Merge(a) => cmd_merge(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::McBench(a) => cmd_mc_bench(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::NoiseCurve(a) => cmd_noise_curve(a),
    }
}

fn load_profile(path: Option<&Path>, why: &str) -> Result<CameraNoiseParams, Failure> {
    match path {
        Some(p) => Ok(read_profile(p)?),
        None => Err(Failure::MissingProfile(format!("{why} requires a camera profile (--profile)"))),
    }
}

fn parse_list<T>(s: &str, what: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, Failure> {
    let items = s
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| f(x).ok_or_else(|| Failure::Input(format!("invalid {what}: {x:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if items.is_empty() {
        return Err(Failure::Input(format!("empty {what} list")));
    }
    Ok(items)
}

pub fn parse_ladder(spec: &str) -> Result<Vec<ExposureMeta>, Failure> {
    parse_list(spec, "ladder entry", |e| {
        let (t, g) = e.split_once(':')?;
        ExposureMeta::new(t.trim().parse().ok()?, g.trim().parse().ok()?).ok()
    })
}

fn parse_channels(s: &str) -> Result<Vec<ChannelId>, Failure> {
    parse_list(s, "channel", |c| c.parse().ok())
}

fn parse_estimators(s: &str) -> Result<Vec<EstimatorKind>, Failure> {
    let mut kinds = parse_list(s, "estimator", |e| e.parse().ok())?;
    let mut seen = Vec::new();
    kinds.retain(|k| if seen.contains(k) { false } else { seen.push(*k); true });
    Ok(kinds)
}

/// Percentage of pixels per channel whose every observation is saturated.
fn saturated_fraction(stack: &ExposureStack, c: usize) -> f64 {
    let nc = stack.channels().len();
    let n = stack.frames[0].pixel_count();
    if n == 0 {
        return 0.0;
    }
    let all = (0..n).filter(|&p| stack.frames.iter().all(|f| f.data[p * nc + c] as f64 >= f.saturation)).count();
    100.0 * all as f64 / n as f64
}

fn summarize(map: &RadianceMap, stack: &ExposureStack) {
    let nc = map.channels.len();
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "channel,min,max,mean,saturated_percent");
    for (c, ch) in map.channels.iter().enumerate() {
        let values = map.data.iter().skip(c).step_by(nc).map(|v| *v as f64);
        let (mut lo, mut hi, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
            sum += v;
            n += 1;
        }
        let mean = if n > 0 { sum / n as f64 } else { f64::NAN };
        let _ = writeln!(out, "{ch},{lo},{hi},{mean},{:.3}", saturated_fraction(stack, c));
    }
}

fn cmd_merge(a: MergeArgs) -> CmdResult {
    let profile = match &a.profile {
        Some(p) => Some(read_profile(p)?),
        None if a.estimator.requires_noise_params() => {
            return Err(Failure::MissingProfile(format!(
                "estimator {} requires accurate camera parameters (--profile)",
                a.estimator
            )))
        }
        None => None,
    };
    let mut stack = read_stack(&a.inputs, a.black_level)?;
    if let Some(p) = &profile {
        for f in &mut stack.frames {
            if !f.saturation.is_finite() {
                f.saturation = p.saturation;
            }
        }
    }
    let y_max = stack
        .frames
        .iter()
        .map(|f| f.saturation)
        .find(|s| s.is_finite())
        .unwrap_or_else(|| stack.frames.iter().flat_map(|f| &f.data).fold(1.0f64, |m, v| m.max(*v as f64)));
    let hat = HatParams { gamma: a.gamma, ..HatParams::for_saturation(y_max) };
    hat.validate()?;
    let map = with_threads(a.threads, || merge_parallel(&stack, a.estimator, profile.as_ref(), Some(hat)))??;
    write_map(&map, &a.out, a.clamp_negative)?;
    summarize(&map, &stack);
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let params = load_profile(a.profile.as_deref(), "simulate")?;
    let ladder = parse_ladder(&a.ladder_spec)?;
    let phi = match (a.phi, &a.phi_map) {
        (Some(phi), None) => {
            if !(phi >= 0.0 && phi.is_finite()) {
                return Err(Failure::Input(format!("--phi must be a non-negative number, got {phi}")));
            }
            RadianceMap::constant(a.width, a.height, parse_channels(&a.channels)?, phi as f32)
        }
        (None, Some(path)) => read_map(path)?,
        _ => return Err(Failure::Input("give exactly one of --phi and --phi-map".into())),
    };
    let stack = synth_stack(&phi, &ladder, &params, a.seed)?;
    let stem = a.out_prefix.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    for (i, frame) in stack.frames.iter().enumerate() {
        let path = a.out_prefix.with_file_name(format!("{stem}_{i}.pfm"));
        write_frame(frame, &path)?;
        println!("{}", path.display());
    }
    Ok(())
}

/// Starting configuration for `mc-bench`: defaults, then `--config`, then
/// flags.
fn mc_config(a: &McBenchArgs) -> Result<McConfig, Failure> {
    let file = a.config.as_ref().map(|p| KeyValues::read(p).map(|kv| (kv, p.clone()))).transpose()?;
    let camera = match (&a.profile, &file) {
        (Some(p), _) => read_profile(p)?,
        (None, Some((kv, path))) if kv.get("k_g").is_some() => CameraNoiseParams {
            name: kv.get("camera").unwrap_or("configured").to_string(),
            k_r: kv.require("k_r", path)?,
            k_g: kv.require("k_g", path)?,
            k_b: kv.require("k_b", path)?,
            sigma_read: kv.require("sigma_read", path)?,
            sigma_adc: kv.require("sigma_adc", path)?,
            saturation: kv.require("saturation", path)?,
            ..CameraNoiseParams::noiseless(1.0)
        },
        _ => return Err(Failure::MissingProfile("mc-bench requires a camera profile (--profile)".into())),
    };
    let mut cfg = McConfig::standard(camera);
    if let Some((kv, path)) = &file {
        let p = path.as_path();
        cfg.n_trials = kv.get_parsed("n_trials", p)?.unwrap_or(cfg.n_trials);
        cfg.mle_trials = kv.get_parsed("mle_trials", p)?.unwrap_or(cfg.mle_trials);
        cfg.n_phi = kv.get_parsed("n_phi", p)?.unwrap_or(cfg.n_phi);
        cfg.phi_range_stops = kv.get_parsed("phi_range_stops", p)?.unwrap_or(cfg.phi_range_stops);
        cfg.static_multiplier = kv.get_parsed("static_multiplier", p)?.unwrap_or(cfg.static_multiplier);
        cfg.gamma = kv.get_parsed("gamma", p)?.unwrap_or(cfg.gamma);
        cfg.em.tol = kv.get_parsed("em_tol", p)?.unwrap_or(cfg.em.tol);
        cfg.em.max_iter = kv.get_parsed("em_max_iter", p)?.unwrap_or(cfg.em.max_iter);
        cfg.seed = kv.get_parsed("seed", p)?.unwrap_or(cfg.seed);
        if let Some(ch) = kv.get("channel") {
            cfg.channel = parse_channel(ch).map_err(Failure::Input)?;
        }
        if let Some(l) = kv.get("ladder") {
            cfg.ladder = parse_ladder(l)?;
        }
        if let Some(e) = kv.get("estimators") {
            cfg.estimators = parse_estimators(e)?;
        }
    }
    if let Some(v) = a.trials {
        cfg.n_trials = v;
    }
    if let Some(v) = a.mle_trials {
        cfg.mle_trials = v;
    }
    if let Some(v) = a.phi_steps {
        cfg.n_phi = v;
    }
    if let Some(v) = a.stops {
        cfg.phi_range_stops = v;
    }
    if let Some(v) = a.channel {
        cfg.channel = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(e) = &a.estimators {
        cfg.estimators = parse_estimators(e)?;
    }
    if a.ladder == Some(LadderKind::Gain) {
        cfg = gain_modulation_config(&cfg);
    }
    if let Some(m) = a.static_mult {
        cfg = amplify_static_noise(&cfg, m)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_mc_bench(a: McBenchArgs) -> CmdResult {
    let cfg = mc_config(&a)?;
    let report = with_threads(a.threads, || run_mc_parallel(&cfg))??;
    write_report(&report, &a.out)?;
    println!("{} rows written to {}", report.rows.len(), a.out.display());
    Ok(())
}

fn cmd_calibrate(a: CalibrateArgs) -> CmdResult {
    let samples = read_samples(&a.samples)?;
    let init = a.init.as_deref().map(read_profile).transpose()?;
    let fit = fit_noise_params(&samples, init.as_ref())?;
    let p = &fit.params;
    let mut notes = vec![
        format!("residual={}", fit.residual),
        format!("initial_residual={}", fit.initial_residual),
        format!("samples_used={}", fit.n_used),
        format!("samples_excluded={}", fit.n_excluded),
        format!("converged={}", fit.converged),
    ];
    if fit.single_gain {
        notes.push("warning: all samples share one gain, so sigma_read and sigma_adc are not separately identifiable".into());
    }
    write_profile(p, &a.out, &notes)?;
    println!(
        "k_r={} k_g={} k_b={} sigma_read={} sigma_adc={}",
        p.k_r, p.k_g, p.k_b, p.sigma_read, p.sigma_adc
    );
    println!("rms relative error {:.6} (start {:.6}), {} samples used, {} excluded", fit.residual, fit.initial_residual, fit.n_used, fit.n_excluded);
    if fit.converged {
        Ok(())
    } else if fit.single_gain {
        Err(Failure::NotConverged(format!("fit is not identifiable from a single gain; profile written to {} and flagged", a.out.display())))
    } else {
        Err(Failure::NotConverged(format!("fit did not converge; profile written to {} and flagged", a.out.display())))
    }
}

fn cmd_noise_curve(a: NoiseCurveArgs) -> CmdResult {
    let params = load_profile(a.profile.as_deref(), "noise-curve")?;
    if !params.saturation.is_finite() {
        return Err(Failure::Input("noise-curve needs a finite saturation".into()));
    }
    let gains = parse_list(&a.gains, "gain", |g| g.parse::<f64>().ok().filter(|g| *g > 0.0 && g.is_finite()))?;
    let channels = parse_channels(&a.channels)?;
    if a.points < 2 {
        return Err(Failure::Input("--points must be at least 2".into()));
    }
    let top = params.saturation.ln();
    let last = a.points - 1;
    let means: Vec<f64> =
        (0..a.points).map(|i| if i == last { params.saturation } else { (top * i as f64 / last as f64).exp() }).collect();
    let mut w = csv::Writer::from_path(&a.out).map_err(|e| Failure::Input(format!("{}: {e}", a.out.display())))?;
    let io = |e: csv::Error| Failure::Input(format!("{}: {e}", a.out.display()));
    w.write_record(["channel", "gain", "mean", "relative_std"]).map_err(io)?;
    for ch in &channels {
        for g in &gains {
            for m in &means {
                let r = predict_relative_std(*m, *g, &params, *ch)?;
                w.write_record([ch.to_string(), g.to_string(), m.to_string(), r.to_string()]).map_err(io)?;
            }
        }
    }
    w.flush().map_err(|e| Failure::Input(format!("{}: {e}", a.out.display())))?;
    Ok(())
}
