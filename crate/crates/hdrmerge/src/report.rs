//! Monte Carlo reports as CSV plus a `key=value` echo of the configuration.

use std::io::Write;
use std::path::{Path, PathBuf};

use hdrmerge_core::simulator::{McConfig, McReport};

use crate::error::{Error, Result};
use crate::sidecar::KeyValueWriter;

pub const REPORT_HEADER: [&str; 5] = ["estimator", "phi", "relative_bias", "relative_std", "n_trials"];

pub fn config_path(report_path: &Path) -> PathBuf {
    report_path.with_extension("config")
}

pub fn ladder_spec(cfg: &McConfig) -> String {
    cfg.ladder.iter().map(|m| format!("{}:{}", m.t, m.g)).collect::<Vec<_>>().join(",")
}

pub fn config_echo(cfg: &McConfig) -> KeyValueWriter {
    let mut kv = KeyValueWriter::default();
    let cam = &cfg.camera;
    kv.entry("camera", &cam.name)
        .entry("k_r", cam.k_r)
        .entry("k_g", cam.k_g)
        .entry("k_b", cam.k_b)
        .entry("sigma_read", cam.sigma_read)
        .entry("sigma_adc", cam.sigma_adc)
        .entry("saturation", cam.saturation)
        .entry("channel", cfg.channel)
        .entry("n_trials", cfg.n_trials)
        .entry("mle_trials", cfg.mle_trials)
        .entry("n_phi", cfg.n_phi)
        .entry("phi_range_stops", cfg.phi_range_stops)
        .entry("phi_max", cfg.phi_max())
        .entry("ladder", ladder_spec(cfg))
        .entry("estimators", cfg.estimators.iter().map(|k| k.name()).collect::<Vec<_>>().join(","))
        .entry("static_multiplier", cfg.static_multiplier)
        .entry("gamma", cfg.gamma)
        .entry("em_tol", cfg.em.tol)
        .entry("em_max_iter", cfg.em.max_iter)
        .entry("seed", cfg.seed);
    kv
}

pub fn report_csv(report: &McReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e: csv::Error| Error::Invalid(format!("report: {e}"));
    w.write_record(REPORT_HEADER).map_err(wrap)?;
    for r in &report.rows {
        w.write_record([
            r.estimator.name().to_string(),
            r.phi.to_string(),
            r.relative_bias.to_string(),
            r.relative_std.to_string(),
            r.n_trials.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.into_inner().map_err(|e| Error::Invalid(format!("report: {e}")))
}

pub fn write_report(report: &McReport, path: &Path) -> Result<()> {
    let bytes = report_csv(report)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    config_echo(&report.config).write(&config_path(path))
}
