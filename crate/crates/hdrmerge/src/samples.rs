//! Patch statistics for calibration, as CSV with the header
//! `mean,std,gain,channel,count`.

use std::path::Path;

use hdrmerge_core::calibration::NoiseSample;

use crate::error::{Error, Result};

const HEADER: [&str; 5] = ["mean", "std", "gain", "channel", "count"];

pub fn read_samples(path: &Path) -> Result<Vec<NoiseSample>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let mut idx = [0usize; 5];
    for (slot, name) in idx.iter_mut().zip(HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::format(path, format!("missing column {name}")))?;
    }
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let field = |i: usize| record.get(idx[i]).unwrap_or("");
        let bad = |i: usize| Error::format(path, format!("row {}: cannot parse {} {:?}", row + 1, HEADER[i], field(i)));
        out.push(NoiseSample {
            mean: field(0).parse().map_err(|_| bad(0))?,
            std: field(1).parse().map_err(|_| bad(1))?,
            gain: field(2).parse().map_err(|_| bad(2))?,
            channel: field(3).parse().map_err(|_| bad(3))?,
            count: field(4).parse().map_err(|_| bad(4))?,
        });
    }
    Ok(out)
}

pub fn write_samples(samples: &[NoiseSample], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(HEADER).map_err(|e| Error::csv(path, e))?;
    for s in samples {
        w.write_record([s.mean.to_string(), s.std.to_string(), s.gain.to_string(), s.channel.to_string(), s.count.to_string()])
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
