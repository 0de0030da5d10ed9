//! Flat key=value configuration files with `[section]` headers. `#` starts a
//! comment; blank lines are ignored. Unknown keys are rejected so typos fail
//! loudly instead of silently falling back to defaults.

use crate::error::{Error, Result};
use crate::synth::RigConfig;

/// Parses `text` into (section, key, value, line_number) entries. Keys before
/// any section header get an empty section name.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String, String, usize)>> {
    let mut out = Vec::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| {
                Error::config("section", format!("line {line_no}: unterminated section header {line:?}"))
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::config("syntax", format!("line {line_no}: expected key=value, got {line:?}"))
        })?;
        out.push((
            section.clone(),
            k.trim().to_string(),
            v.trim().to_string(),
            line_no,
        ));
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| {
        Error::config(
            key,
            format!("line {line}: cannot parse value {value:?}"),
        )
    })
}

/// Reads a rig configuration. Recognized section: `[rig]` (or no section).
/// Missing keys keep their defaults; the result is validated.
pub fn parse_rig_config(text: &str) -> Result<RigConfig> {
    let mut cfg = RigConfig::default();
    for (section, key, value, line) in parse_kv(text)? {
        if !(section.is_empty() || section == "rig") {
            return Err(Error::config(
                "section",
                format!("line {line}: unknown section {section:?}"),
            ));
        }
        match key.as_str() {
            "n_baselines" => cfg.n_baselines = parse_num(&key, &value, line)?,
            "gvf_steps_per_baseline" => {
                cfg.gvf_steps_per_baseline = parse_num(&key, &value, line)?
            }
            "seed" => cfg.seed = parse_num(&key, &value, line)?,
            "noise_scale" => cfg.noise_scale = parse_num(&key, &value, line)?,
            "oscillation_freq_hz" => cfg.oscillation_freq_hz = parse_num(&key, &value, line)?,
            "bias_gain" => cfg.bias_gain = parse_num(&key, &value, line)?,
            other => {
                return Err(Error::config(
                    other,
                    format!("line {line}: unknown key"),
                ))
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Canonical text form; `parse_rig_config` round-trips it.
pub fn serialize_rig_config(cfg: &RigConfig) -> String {
    format!(
        "[rig]\nn_baselines={}\ngvf_steps_per_baseline={}\nseed={}\nnoise_scale={}\noscillation_freq_hz={}\nbias_gain={}\n",
        cfg.n_baselines,
        cfg.gvf_steps_per_baseline,
        cfg.seed,
        cfg.noise_scale,
        cfg.oscillation_freq_hz,
        cfg.bias_gain
    )
}
