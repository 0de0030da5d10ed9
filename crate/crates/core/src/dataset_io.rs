//! Plain-text dataset format.
//!
//! Layout (tab-separated, `.` decimal point, no locale formatting):
//!
//! ```text
//! cmfds <schema_version> <sample_rate_hz>
//! E <group_id> <water_cut> <viscosity> <oil_mf> <total_mf> <gvf> <pressure_base> <temperature_base> <duration_s> <n>
//! <timestamp_s> <f1> <f2> <f3> <f4> <f5> <true_total_mf>     (n rows)
//! E ...
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! save -> load is identity to full precision.

use crate::error::{Error, Result};
use crate::types::{Experiment, OperatingPoint, SampledSeries, NUM_FEATURES};
use std::fmt::Write as _;
use std::path::Path;

const MAGIC: &str = "cmfds";
const SCHEMA_VERSION: u32 = 1;

pub fn save_dataset(ds: &[Experiment], path: &Path) -> Result<()> {
    std::fs::write(path, serialize_dataset(ds)?)?;
    Ok(())
}

pub fn serialize_dataset(ds: &[Experiment]) -> Result<String> {
    let rate = ds
        .first()
        .map(|e| e.channels.sample_rate_hz)
        .unwrap_or(crate::synth::RIG_SAMPLE_RATE_HZ);
    let mut out = String::new();
    writeln!(out, "{MAGIC}\t{SCHEMA_VERSION}\t{rate}").unwrap();
    for exp in ds {
        let op = &exp.op;
        writeln!(
            out,
            "E\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            exp.group_id,
            op.water_cut,
            op.viscosity,
            op.oil_mass_flow,
            op.total_mass_flow,
            op.gvf,
            op.pressure_base,
            op.temperature_base,
            exp.duration_s,
            exp.num_samples()
        )
        .unwrap();
        for i in 0..exp.num_samples() {
            let t = i as f64 / exp.channels.sample_rate_hz;
            write!(out, "{t}").unwrap();
            for c in 0..NUM_FEATURES {
                write!(out, "\t{}", exp.channels.data[c][i]).unwrap();
            }
            writeln!(out, "\t{}", exp.truth.data[0][i]).unwrap();
        }
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Vec<Experiment>> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text)
}

fn parse_f64(s: &str, record: usize, what: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Parse {
        record,
        message: format!("invalid {what}: {s:?}"),
    })
}

pub fn parse_dataset(text: &str) -> Result<Vec<Experiment>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        record: 0,
        message: "empty file".into(),
    })?;
    let h: Vec<&str> = header.split('\t').collect();
    if h.len() != 3 || h[0] != MAGIC {
        return Err(Error::Parse {
            record: 0,
            message: format!("bad header: {header:?}"),
        });
    }
    let version: u32 = h[1].parse().map_err(|_| Error::Parse {
        record: 0,
        message: format!("bad schema version: {:?}", h[1]),
    })?;
    if version != SCHEMA_VERSION {
        return Err(Error::Parse {
            record: 0,
            message: format!("unsupported schema version {version}"),
        });
    }
    let rate = parse_f64(h[2], 0, "sample_rate_hz")?;

    let mut ds = Vec::new();
    while let Some((lineno, line)) = lines.next() {
        if line.is_empty() {
            continue;
        }
        let meta: Vec<&str> = line.split('\t').collect();
        if meta.len() != 11 || meta[0] != "E" {
            return Err(Error::Parse {
                record: lineno,
                message: format!("expected experiment metadata record, got {line:?}"),
            });
        }
        let group_id: u32 = meta[1].parse().map_err(|_| Error::Parse {
            record: lineno,
            message: format!("invalid group_id: {:?}", meta[1]),
        })?;
        let op = OperatingPoint {
            water_cut: parse_f64(meta[2], lineno, "water_cut")?,
            viscosity: parse_f64(meta[3], lineno, "viscosity")?,
            oil_mass_flow: parse_f64(meta[4], lineno, "oil_mass_flow")?,
            total_mass_flow: parse_f64(meta[5], lineno, "total_mass_flow")?,
            gvf: parse_f64(meta[6], lineno, "gvf")?,
            pressure_base: parse_f64(meta[7], lineno, "pressure_base")?,
            temperature_base: parse_f64(meta[8], lineno, "temperature_base")?,
        };
        let duration_s = parse_f64(meta[9], lineno, "duration_s")?;
        let n: usize = meta[10].parse().map_err(|_| Error::Parse {
            record: lineno,
            message: format!("invalid sample count: {:?}", meta[10]),
        })?;

        let mut channels: Vec<Vec<f64>> = vec![Vec::with_capacity(n); NUM_FEATURES];
        let mut truth = Vec::with_capacity(n);
        for _ in 0..n {
            let (dlineno, dline) = lines.next().ok_or(Error::Parse {
                record: lineno,
                message: format!("experiment {group_id}: truncated data block"),
            })?;
            let cols: Vec<&str> = dline.split('\t').collect();
            if cols.len() != 2 + NUM_FEATURES {
                return Err(Error::Parse {
                    record: dlineno,
                    message: format!("expected {} columns, got {}", 2 + NUM_FEATURES, cols.len()),
                });
            }
            for c in 0..NUM_FEATURES {
                channels[c].push(parse_f64(cols[1 + c], dlineno, "feature")?);
            }
            truth.push(parse_f64(cols[1 + NUM_FEATURES], dlineno, "truth")?);
        }

        let exp = Experiment {
            group_id,
            op,
            duration_s,
            channels: SampledSeries::new(rate, channels)?,
            truth: SampledSeries::new(rate, vec![truth])?,
        };
        exp.validate()?;
        ds.push(exp);
    }
    if ds.is_empty() {
        return Err(Error::Parse {
            record: 1,
            message: "dataset contains no experiments".into(),
        });
    }
    Ok(ds)
}
