//! Synthetic three-phase air-water-oil rig data.
//!
//! Produces experiments that mimic the character of a multiphase flow loop:
//! a combined-flow meter that under-reads as gas volume fraction grows, with a
//! dominant oscillation and noise on top, plus slowly drifting auxiliary
//! channels. The error model is a stand-in, not a physical tube model.

use crate::error::{Error, Result};
use crate::types::{Experiment, OperatingPoint, SampledSeries};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Raw rig sample rate in Hz.
pub const RIG_SAMPLE_RATE_HZ: f64 = 14.3;

/// Nominal experiment duration in seconds (jittered ±5% per experiment).
pub const NOMINAL_DURATION_S: f64 = 60.0;

/// Frequency of the slow slugging modulation superimposed on both meters.
pub const SLUG_FREQ_HZ: f64 = 0.07;

/// Generator configuration. Identical configs produce bit-identical datasets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigConfig {
    /// Number of baseline settings (water cut, viscosity, flow rates).
    pub n_baselines: u32,
    /// Experiments per baseline; GVF steps upward across them.
    pub gvf_steps_per_baseline: u32,
    pub seed: u64,
    /// Scales the additive measurement noise; 0 disables it.
    pub noise_scale: f64,
    /// Dominant oscillation frequency of the apparent combined flow.
    pub oscillation_freq_hz: f64,
    /// Strength of the GVF-dependent under-read, in [0, 1].
    pub bias_gain: f64,
}

impl Default for RigConfig {
    fn default() -> Self {
        RigConfig {
            n_baselines: 48,
            gvf_steps_per_baseline: 6,
            seed: 42,
            noise_scale: 1.0,
            oscillation_freq_hz: 0.8,
            bias_gain: 0.45,
        }
    }
}

impl RigConfig {
    pub fn validate(&self) -> Result<()> {
        if (self.n_baselines as u64) * (self.gvf_steps_per_baseline as u64) < 2 {
            return Err(Error::config(
                "n_baselines",
                format!(
                    "n_baselines ({}) x gvf_steps_per_baseline ({}) must be >= 2",
                    self.n_baselines, self.gvf_steps_per_baseline
                ),
            ));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(Error::config(
                "noise_scale",
                format!("must be >= 0, got {}", self.noise_scale),
            ));
        }
        if !(self.oscillation_freq_hz > 0.0 && self.oscillation_freq_hz < RIG_SAMPLE_RATE_HZ / 2.0)
        {
            return Err(Error::config(
                "oscillation_freq_hz",
                format!(
                    "must be in (0, {}), got {}",
                    RIG_SAMPLE_RATE_HZ / 2.0,
                    self.oscillation_freq_hz
                ),
            ));
        }
        if !(self.bias_gain >= 0.0 && self.bias_gain <= 1.0) {
            return Err(Error::config(
                "bias_gain",
                format!("must be in [0, 1], got {}", self.bias_gain),
            ));
        }
        Ok(())
    }
}

/// Monotone convex GVF-to-underread shape; 0 at gvf = 0.
fn bias_shape(gvf: f64) -> f64 {
    gvf * gvf
}

/// Derives an independent stream seed so experiment order never matters.
fn stream_seed(master: u64, tag: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = master
        .wrapping_add(tag.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(index.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

struct BaselineSetting {
    water_cut: f64,
    viscosity: f64,
    oil_mass_flow: f64,
    total_mass_flow: f64,
    pressure_base: f64,
    temperature_base: f64,
    gvf_max: f64,
}

fn draw_baseline(cfg: &RigConfig, baseline_idx: u32) -> BaselineSetting {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, 1, baseline_idx as u64));
    let water_cut = rng.gen_range(0.0..0.994);
    let viscosity = (rng.gen_range(7.17e-4f64.ln()..666.0f64.ln())).exp();
    let total_mass_flow = rng.gen_range(1000.0..14500.0);
    let pressure_base = rng.gen_range(1.1..4.0);
    let temperature_base = rng.gen_range(20.0..35.0);
    let gvf_max = rng.gen_range(0.5..0.955);
    let oil: f64 = (1.0 - water_cut) * total_mass_flow * 0.97;
    let oil = oil.clamp(10.6, 12900.0f64.min(total_mass_flow));
    BaselineSetting {
        water_cut,
        viscosity,
        oil_mass_flow: oil,
        total_mass_flow,
        pressure_base,
        temperature_base,
        gvf_max,
    }
}

/// First-order autoregressive sequence with stationary std `sigma` and
/// correlation time `tau_s` at the given rate.
fn ar1(rng: &mut ChaCha8Rng, n: usize, sigma: f64, tau_s: f64, rate_hz: f64) -> Vec<f64> {
    let rho = (-1.0 / (tau_s * rate_hz)).exp();
    let innov = sigma * (1.0 - rho * rho).sqrt();
    let mut out = Vec::with_capacity(n);
    let mut x = sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
    for _ in 0..n {
        out.push(x);
        x = rho * x + innov * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
    }
    out
}

fn generate_experiment(cfg: &RigConfig, base: &BaselineSetting, group_id: u32, gvf: f64) -> Result<Experiment> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, 2, group_id as u64));
    let rate = RIG_SAMPLE_RATE_HZ;

    let duration_s = NOMINAL_DURATION_S * (1.0 + rng.gen_range(-0.05..0.05));
    let n = (duration_s * rate).round() as usize;

    let pressure_base = (base.pressure_base + 0.35 * gvf).min(4.49);
    let op = OperatingPoint {
        water_cut: base.water_cut,
        viscosity: base.viscosity,
        oil_mass_flow: base.oil_mass_flow,
        total_mass_flow: base.total_mass_flow,
        gvf,
        pressure_base,
        temperature_base: base.temperature_base,
    };
    op.validate()?;

    let phase_main = rng.gen_range(0.0..std::f64::consts::TAU);
    let phase_liquid = rng.gen_range(0.0..std::f64::consts::TAU);

    let drift = ar1(&mut rng, n, 0.002, 20.0, rate);
    let slow_disturbance = ar1(&mut rng, n, 0.02 * gvf, 3.0, rate);
    // the separator's carry-over varies slowly too, so the liquid-line meter
    // cannot be inverted pointwise when gas is present
    let liquid_disturbance = ar1(&mut rng, n, 0.02 * gvf, 3.0, rate);
    // slow slugging: a narrowband modulation with a randomly drifting phase.
    // Pointwise its phase is unknowable, but a few-sample window at a coarse
    // rate resolves it, which is what gives temporal models their edge.
    let slug_phase_main = rng.gen_range(0.0..std::f64::consts::TAU);
    let slug_phase_liquid = rng.gen_range(0.0..std::f64::consts::TAU);
    let slug_drift = {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            acc += 0.01 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            out.push(acc);
        }
        out
    };
    let slug_omega = std::f64::consts::TAU * SLUG_FREQ_HZ;
    let slug_amp_main = 0.14 * gvf;
    let slug_amp_liquid = 0.06 * gvf;
    let temp_main_ar = ar1(&mut rng, n, 0.15, 10.0, rate);
    let temp_liquid_ar = ar1(&mut rng, n, 0.15, 10.0, rate);
    let pressure_ar = ar1(&mut rng, n, 0.02, 8.0, rate);

    let bias_factor = 1.0 - cfg.bias_gain * bias_shape(gvf);
    let osc_amp = 0.18 * gvf;
    let noise_main = cfg.noise_scale * 0.004 * base.total_mass_flow;
    let noise_liquid = cfg.noise_scale * 0.002 * base.total_mass_flow;
    // Liquid-line meter sees the flow after gas separation, with a small
    // GVF-correlated carry-under distortion.
    let liquid_mf = base.total_mass_flow * (1.0 - 0.02 * gvf);
    let liquid_bias = 1.0 - 0.02 * cfg.bias_gain * bias_shape(gvf);

    let omega = std::f64::consts::TAU * cfg.oscillation_freq_hz;

    let mut truth = Vec::with_capacity(n);
    let mut mf_main = Vec::with_capacity(n);
    let mut mf_liquid = Vec::with_capacity(n);
    let mut temp_main = Vec::with_capacity(n);
    let mut temp_liquid = Vec::with_capacity(n);
    let mut pressure = Vec::with_capacity(n);

    for i in 0..n {
        let t = i as f64 / rate;
        let true_mf = base.total_mass_flow * (1.0 + drift[i]);
        let osc = 1.0 + osc_amp * (omega * t + phase_main).sin();
        let eps_main: f64 =
            noise_main * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
        let eps_liquid: f64 =
            noise_liquid * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);

        truth.push(true_mf);
        let slug_main = slug_amp_main * (slug_omega * t + slug_phase_main + slug_drift[i]).sin();
        let slug_liquid =
            slug_amp_liquid * (slug_omega * t + slug_phase_liquid + slug_drift[i]).sin();
        mf_main.push(
            true_mf * bias_factor * osc * (1.0 + slow_disturbance[i] + slug_main) + eps_main,
        );
        mf_liquid.push(
            liquid_mf
                * (1.0 + drift[i])
                * liquid_bias
                * (1.0 + liquid_disturbance[i] + slug_liquid)
                * (1.0 + 0.2 * osc_amp * (omega * t + phase_liquid).sin())
                + eps_liquid,
        );
        temp_main.push(base.temperature_base + temp_main_ar[i]);
        temp_liquid.push(base.temperature_base - 0.3 + temp_liquid_ar[i]);
        pressure.push(pressure_base + pressure_ar[i]);
    }

    let channels = SampledSeries::new(
        rate,
        vec![mf_main, mf_liquid, temp_main, temp_liquid, pressure],
    )?;
    let truth = SampledSeries::new(rate, vec![truth])?;

    let exp = Experiment {
        group_id,
        op,
        duration_s,
        channels,
        truth,
    };
    exp.validate()?;
    Ok(exp)
}

/// Generates the full synthetic dataset in chronological group order.
pub fn generate_dataset(cfg: &RigConfig) -> Result<Vec<Experiment>> {
    cfg.validate()?;
    let steps = cfg.gvf_steps_per_baseline;
    let mut out = Vec::with_capacity((cfg.n_baselines * steps) as usize);
    let mut group_id = 1u32;
    for b in 0..cfg.n_baselines {
        let base = draw_baseline(cfg, b);
        for j in 0..steps {
            let gvf = if steps <= 1 {
                0.0
            } else {
                base.gvf_max * j as f64 / (steps - 1) as f64
            };
            out.push(generate_experiment(cfg, &base, group_id, gvf)?);
            group_id += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::APPARENT_MF_MAIN;

    fn small_cfg() -> RigConfig {
        RigConfig {
            n_baselines: 2,
            gvf_steps_per_baseline: 3,
            seed: 7,
            ..RigConfig::default()
        }
    }

    #[test]
    fn structure_and_group_ids() {
        let ds = generate_dataset(&small_cfg()).unwrap();
        assert_eq!(ds.len(), 6);
        let ids: Vec<u32> = ds.iter().map(|e| e.group_id).collect();
        assert_eq!(ids, vec![1, 2, 3, 4, 5, 6]);
        // GVF monotone within each baseline
        for chunk in ds.chunks(3) {
            assert!(chunk[0].op.gvf < chunk[1].op.gvf);
            assert!(chunk[1].op.gvf < chunk[2].op.gvf);
        }
    }

    #[test]
    fn zero_gvf_zero_noise_is_exact() {
        let cfg = RigConfig {
            n_baselines: 2,
            gvf_steps_per_baseline: 1,
            seed: 3,
            noise_scale: 0.0,
            ..RigConfig::default()
        };
        let ds = generate_dataset(&cfg).unwrap();
        for exp in &ds {
            assert_eq!(exp.op.gvf, 0.0);
            for (a, t) in exp.channels.data[APPARENT_MF_MAIN]
                .iter()
                .zip(&exp.truth.data[0])
            {
                assert!(((a - t) / t).abs() < 1e-9, "apparent {a} vs truth {t}");
            }
        }
    }

    #[test]
    fn determinism() {
        let cfg = small_cfg();
        let a = generate_dataset(&cfg).unwrap();
        let b = generate_dataset(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mean_relative_error_monotone_in_gvf() {
        let ds = generate_dataset(&RigConfig {
            n_baselines: 3,
            gvf_steps_per_baseline: 5,
            seed: 11,
            ..RigConfig::default()
        })
        .unwrap();
        for chunk in ds.chunks(5) {
            let mean_re: Vec<f64> = chunk
                .iter()
                .map(|e| {
                    let a = &e.channels.data[APPARENT_MF_MAIN];
                    let t = &e.truth.data[0];
                    a.iter()
                        .zip(t)
                        .map(|(a, t)| ((a - t) / t).abs())
                        .sum::<f64>()
                        / t.len() as f64
                })
                .collect();
            for w in mean_re.windows(2) {
                assert!(
                    w[1] >= w[0] - 1e-3,
                    "mean |RE| should be nondecreasing in GVF: {mean_re:?}"
                );
            }
            // single-phase error small, high-GVF error tens of percent
            assert!(mean_re[0] < 0.01, "gvf=0 error {} should be < 1%", mean_re[0]);
            assert!(mean_re[4] > 0.05, "high-GVF error {} should be large", mean_re[4]);
        }
    }

    #[test]
    fn gas_produces_spectral_lines() {
        // With gas present and low noise, both the fast flow oscillation and
        // the slow slugging show up as clear lines in the main meter's
        // periodogram, well above the broadband floor.
        let cfg = RigConfig {
            n_baselines: 2,
            gvf_steps_per_baseline: 4,
            seed: 19,
            noise_scale: 0.05,
            ..RigConfig::default()
        };
        let ds = generate_dataset(&cfg).unwrap();
        for exp in ds.iter().filter(|e| e.op.gvf >= 0.2) {
            let x = &exp.channels.data[APPARENT_MF_MAIN];
            let p = crate::dsp::periodogram(x);
            let rate = exp.channels.sample_rate_hz;
            let df = rate / x.len() as f64;
            let mut floor: Vec<f64> = p[1..].to_vec();
            floor.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median_power = floor[floor.len() / 2];
            let line_power = |freq_hz: f64| -> f64 {
                let lo = (freq_hz * 0.8 / df).floor() as usize;
                let hi = ((freq_hz * 1.2 / df).ceil() as usize).min(p.len() - 1);
                p[lo.max(1)..=hi].iter().cloned().fold(0.0, f64::max)
            };
            for freq in [cfg.oscillation_freq_hz, SLUG_FREQ_HZ] {
                assert!(
                    line_power(freq) > 20.0 * median_power,
                    "gvf {}: no clear line at {freq} Hz",
                    exp.op.gvf
                );
            }
        }
    }

    #[test]
    fn invalid_config_names_field() {
        let cfg = RigConfig {
            noise_scale: -1.0,
            ..small_cfg()
        };
        let err = generate_dataset(&cfg).unwrap_err();
        assert!(err.to_string().contains("noise_scale"), "{err}");
    }
}
