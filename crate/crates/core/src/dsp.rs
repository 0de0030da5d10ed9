//! Anti-aliasing filtering, decimation, whole-experiment averaging, and
//! the aliasing assessment used before choosing downsampling intervals.

use crate::error::{Error, Result};
use crate::types::SampledSeries;
use rustfft::{num_complex::Complex, FftPlanner};

/// Canonical downsampling intervals in seconds.
pub const DOWNSAMPLE_INTERVALS_S: [f64; 8] = [0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0];

/// Default FIR length.
pub const DEFAULT_FIR_LENGTH: usize = 129;

/// Default cutoff as a fraction of the target-rate Nyquist.
pub const DEFAULT_CUTOFF_NORM: f64 = 0.8;

/// Linear-phase low-pass FIR filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    pub taps: Vec<f64>,
    /// Cutoff in Hz (at the source rate this filter is applied to).
    pub cutoff_hz: f64,
    pub source_rate_hz: f64,
}

impl FirFilter {
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Amplitude response |H(f)| evaluated directly from the taps.
    pub fn amplitude_at(&self, freq_hz: f64) -> f64 {
        let omega = std::f64::consts::TAU * freq_hz / self.source_rate_hz;
        let (mut re, mut im) = (0.0, 0.0);
        for (k, &h) in self.taps.iter().enumerate() {
            re += h * (omega * k as f64).cos();
            im -= h * (omega * k as f64).sin();
        }
        (re * re + im * im).sqrt()
    }
}

/// Windowed-sinc (Hamming) low-pass design. Cutoff is `cutoff_norm` times the
/// Nyquist frequency of the target (post-decimation) rate.
pub fn design_lowpass(
    length: usize,
    cutoff_norm: f64,
    target_rate_hz: f64,
    source_rate_hz: f64,
) -> Result<FirFilter> {
    if length < 3 || length % 2 == 0 {
        return Err(Error::Parameter(format!(
            "filter length must be odd and >= 3, got {length}"
        )));
    }
    let cutoff_hz = cutoff_norm * target_rate_hz / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < source_rate_hz / 2.0) {
        return Err(Error::Parameter(format!(
            "cutoff {cutoff_hz} Hz must be in (0, {}) Hz",
            source_rate_hz / 2.0
        )));
    }
    let fc = cutoff_hz / source_rate_hz; // cycles per sample
    let half = (length - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = (0..length)
        .map(|n| {
            let x = n as f64 - half;
            let sinc = if x == 0.0 {
                2.0 * fc
            } else {
                (std::f64::consts::TAU * fc * x).sin() / (std::f64::consts::PI * x)
            };
            let window = 0.54
                - 0.46 * (std::f64::consts::TAU * n as f64 / (length - 1) as f64).cos();
            sinc * window
        })
        .collect();
    // enforce exact linear phase: mirror the first half bit-for-bit
    for n in 0..length / 2 {
        taps[length - 1 - n] = taps[n];
    }
    // normalize DC gain to exactly 1
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    Ok(FirFilter {
        taps,
        cutoff_hz,
        source_rate_hz,
    })
}

/// Convolves every channel with the filter, reflect-padding (L-1)/2 samples at
/// both ends so the output stays time-aligned and keeps the input length.
pub fn filter_series(s: &SampledSeries, f: &FirFilter) -> Result<SampledSeries> {
    let n = s.len();
    let l = f.len();
    if n < l {
        return Err(Error::Parameter(format!(
            "series length {n} shorter than filter length {l}"
        )));
    }
    let half = (l - 1) / 2;
    let data = s
        .data
        .iter()
        .map(|x| {
            let mut padded = Vec::with_capacity(n + 2 * half);
            for i in (1..=half).rev() {
                padded.push(x[i]);
            }
            padded.extend_from_slice(x);
            for i in 1..=half {
                padded.push(x[n - 1 - i]);
            }
            (0..n)
                .map(|t| {
                    f.taps
                        .iter()
                        .enumerate()
                        .map(|(k, &h)| h * padded[t + k])
                        .sum()
                })
                .collect()
        })
        .collect();
    SampledSeries::new(s.sample_rate_hz, data)
}

/// How a series is reduced before modeling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResampleSpec {
    /// Keep the original rate untouched.
    Original,
    /// Anti-alias filter then keep every k-th sample, k = round(interval * rate).
    Interval { interval_s: f64 },
    /// Single sample per channel: the mean over the whole experiment.
    PerExperimentMean,
}

impl ResampleSpec {
    /// Decimation factor for the given source rate.
    pub fn decimation_factor(&self, source_rate_hz: f64) -> Result<usize> {
        match self {
            ResampleSpec::Interval { interval_s } => {
                let k = (interval_s * source_rate_hz).round();
                if k < 1.0 {
                    Err(Error::Parameter(format!(
                        "decimation factor {k} < 1 for interval {interval_s} s at {source_rate_hz} Hz"
                    )))
                } else {
                    Ok(k as usize)
                }
            }
            _ => Ok(1),
        }
    }
}

/// Keeps every k-th sample / averages the experiment / passes through.
/// For a decimating spec the caller must have low-pass filtered `s` first;
/// [`process_series`] enforces that ordering.
pub fn downsample(s: &SampledSeries, spec: &ResampleSpec) -> Result<SampledSeries> {
    match spec {
        ResampleSpec::Original => Ok(s.clone()),
        ResampleSpec::Interval { .. } => {
            let k = spec.decimation_factor(s.sample_rate_hz)?;
            let data = s
                .data
                .iter()
                .map(|c| c.iter().step_by(k).copied().collect())
                .collect();
            SampledSeries::new(s.sample_rate_hz / k as f64, data)
        }
        ResampleSpec::PerExperimentMean => {
            let n = s.len();
            if n == 0 {
                return Err(Error::Parameter("cannot average an empty series".into()));
            }
            let data = s
                .data
                .iter()
                .map(|c| vec![c.iter().sum::<f64>() / n as f64])
                .collect();
            SampledSeries::new(s.sample_rate_hz / n as f64, data)
        }
    }
}

/// Full reduction pipeline: anti-alias filter before any decimation, raw mean
/// for the whole-experiment average, identity otherwise.
pub fn process_series(s: &SampledSeries, spec: &ResampleSpec) -> Result<SampledSeries> {
    match spec {
        ResampleSpec::Original => Ok(s.clone()),
        ResampleSpec::PerExperimentMean => downsample(s, spec),
        ResampleSpec::Interval { .. } => {
            let k = spec.decimation_factor(s.sample_rate_hz)?;
            let target_rate = s.sample_rate_hz / k as f64;
            let fir = design_lowpass(
                DEFAULT_FIR_LENGTH,
                DEFAULT_CUTOFF_NORM,
                target_rate,
                s.sample_rate_hz,
            )?;
            let filtered = filter_series(s, &fir)?;
            downsample(&filtered, spec)
        }
    }
}

/// Mean-removed periodogram: power per frequency bin 0..=n/2, bin width fs/n.
pub fn periodogram(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.iter().take(n / 2 + 1).map(|c| c.norm_sqr()).collect()
}

/// Per-channel fraction of (non-DC) spectral energy above the target Nyquist.
#[derive(Debug, Clone, PartialEq)]
pub struct AliasReport {
    pub fractions: Vec<f64>,
    pub flags: Vec<bool>,
    pub threshold: f64,
}

pub const DEFAULT_ALIAS_THRESHOLD: f64 = 0.01;

pub fn assess_aliasing(s: &SampledSeries, target_rate_hz: f64) -> Result<AliasReport> {
    assess_aliasing_with_threshold(s, target_rate_hz, DEFAULT_ALIAS_THRESHOLD)
}

pub fn assess_aliasing_with_threshold(
    s: &SampledSeries,
    target_rate_hz: f64,
    threshold: f64,
) -> Result<AliasReport> {
    let n = s.len();
    if n < 8 {
        return Err(Error::Parameter(format!(
            "series too short for spectral assessment: {n} samples"
        )));
    }
    if target_rate_hz >= s.sample_rate_hz {
        return Err(Error::Parameter(format!(
            "target rate {target_rate_hz} Hz must be below source rate {} Hz",
            s.sample_rate_hz
        )));
    }
    let target_nyquist = target_rate_hz / 2.0;
    let bin_width = s.sample_rate_hz / n as f64;
    let fractions: Vec<f64> = s
        .data
        .iter()
        .map(|c| {
            let p = periodogram(c);
            let total: f64 = p.iter().skip(1).sum();
            if total == 0.0 {
                return 0.0;
            }
            let above: f64 = p
                .iter()
                .enumerate()
                .skip(1)
                .filter(|(i, _)| *i as f64 * bin_width > target_nyquist)
                .map(|(_, v)| v)
                .sum();
            above / total
        })
        .collect();
    let flags = fractions.iter().map(|&f| f > threshold).collect();
    Ok(AliasReport {
        fractions,
        flags,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(rate: f64, x: Vec<f64>) -> SampledSeries {
        SampledSeries::new(rate, vec![x]).unwrap()
    }

    fn tone(rate: f64, freq: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (std::f64::consts::TAU * freq * i as f64 / rate).sin())
            .collect()
    }

    #[test]
    fn designed_filter_is_symmetric_with_unit_dc_gain() {
        let f = design_lowpass(129, 0.8, 14.3 / 4.0, 14.3).unwrap();
        assert_eq!(f.len(), 129);
        for k in 0..129 {
            assert!((f.taps[k] - f.taps[128 - k]).abs() < 1e-12);
        }
        let dc: f64 = f.taps.iter().sum();
        assert!((dc - 1.0).abs() < 1e-9);
        assert!((f.amplitude_at(0.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn minus_6db_point_near_cutoff() {
        let f = design_lowpass(129, 0.8, 14.3 / 4.0, 14.3).unwrap();
        // |H| at the cutoff of a windowed-sinc design sits at the -6 dB point
        let amp = f.amplitude_at(f.cutoff_hz);
        assert!(
            (amp - 0.5).abs() < 0.02,
            "amplitude at cutoff was {amp}, expected ~0.5"
        );
    }

    #[test]
    fn stopband_attenuation() {
        let f = design_lowpass(129, 0.8, 14.3 / 4.0, 14.3).unwrap();
        let mut freq = 1.3 * f.cutoff_hz;
        while freq < 14.3 / 2.0 {
            let db = 20.0 * f.amplitude_at(freq).log10();
            assert!(db <= -50.0, "only {db} dB at {freq} Hz");
            freq += 0.01;
        }
    }

    #[test]
    fn even_length_rejected() {
        assert!(design_lowpass(128, 0.8, 3.0, 14.3).is_err());
        assert!(design_lowpass(129, 0.8, 20.0, 14.3).is_err()); // cutoff >= Nyquist
    }

    #[test]
    fn short_filter_near_identity_at_low_frequency() {
        let f = design_lowpass(3, 0.99, 14.3, 14.3).unwrap();
        assert!(f.amplitude_at(0.05) > 0.99);
    }

    #[test]
    fn constant_series_passes_unchanged() {
        let f = design_lowpass(129, 0.8, 14.3 / 4.0, 14.3).unwrap();
        let s = series(14.3, vec![3.25; 400]);
        let y = filter_series(&s, &f).unwrap();
        assert_eq!(y.len(), 400);
        for v in &y.data[0] {
            assert!((v - 3.25).abs() < 1e-9);
        }
    }

    #[test]
    fn impulse_reproduces_centered_taps() {
        let f = design_lowpass(9, 0.5, 14.3, 14.3 * 4.0).unwrap();
        let mut x = vec![0.0; 64];
        x[32] = 1.0;
        let y = filter_series(&series(14.3, x), &f).unwrap();
        for k in 0..9 {
            assert!((y.data[0][32 - 4 + k] - f.taps[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn stopband_tone_attenuated_per_transfer_function() {
        // oracle: the filter's own frequency response evaluated by direct DFT
        let f = design_lowpass(129, 0.8, 14.3 / 4.0, 14.3).unwrap();
        let freq = 2.0; // Hz, well beyond the stopband edge
        let expected = f.amplitude_at(freq);
        assert!(expected < 10f64.powf(-50.0 / 20.0));
        let n = 2048;
        let y = filter_series(&series(14.3, tone(14.3, freq, n)), &f).unwrap();
        // RMS over the interior to dodge edge effects
        let interior = &y.data[0][200..n - 200];
        let rms =
            (interior.iter().map(|v| v * v).sum::<f64>() / interior.len() as f64).sqrt();
        let measured_amp = rms * std::f64::consts::SQRT_2;
        assert!(
            measured_amp <= expected * 3.0 + 1e-9,
            "measured {measured_amp}, transfer function predicts {expected}"
        );
        assert!(measured_amp < 10f64.powf(-50.0 / 20.0));
    }

    #[test]
    fn decimation_factor_for_4s_interval() {
        let spec = ResampleSpec::Interval { interval_s: 4.0 };
        assert_eq!(spec.decimation_factor(14.3).unwrap(), 57);
        let s = series(14.3, (0..858).map(|i| i as f64).collect());
        let y = downsample(&s, &spec).unwrap();
        assert!((y.sample_rate_hz - 14.3 / 57.0).abs() < 1e-12);
        assert_eq!(y.len(), 16);
        assert_eq!(y.data[0][1], 57.0);
    }

    #[test]
    fn per_experiment_mean_of_ramp() {
        let n = 101;
        let ramp: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let y = downsample(&series(14.3, ramp), &ResampleSpec::PerExperimentMean).unwrap();
        assert_eq!(y.len(), 1);
        assert!((y.data[0][0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn original_is_identity() {
        let s = series(14.3, tone(14.3, 1.0, 128));
        let y = downsample(&s, &ResampleSpec::Original).unwrap();
        assert_eq!(s, y);
    }

    #[test]
    fn passband_tone_amplitude_preserved_after_pipeline() {
        // tone below 0.8x target Nyquist survives filter + decimation
        let spec = ResampleSpec::Interval { interval_s: 0.25 };
        let rate = 14.3;
        let k = spec.decimation_factor(rate).unwrap();
        let target_nyq = rate / k as f64 / 2.0;
        let freq = 0.5 * 0.8 * target_nyq;
        let n = 4096;
        let y = process_series(&series(rate, tone(rate, freq, n)), &spec).unwrap();
        let m = y.len();
        let interior = &y.data[0][m / 8..m - m / 8];
        let rms =
            (interior.iter().map(|v| v * v).sum::<f64>() / interior.len() as f64).sqrt();
        let amp = rms * std::f64::consts::SQRT_2;
        let ripple = 10f64.powf(0.5 / 20.0);
        assert!(amp < ripple && amp > 1.0 / ripple, "amplitude {amp}");
    }

    #[test]
    fn aliasing_fraction_examples() {
        let rate = 64.0;
        let n = 2048;
        // below target Nyquist (bin-centered to keep leakage tiny)
        let f_lo = 4.0 * rate / n as f64 * 32.0; // = 4 Hz
        let s = series(rate, tone(rate, f_lo, n));
        let rep = assess_aliasing(&s, 16.0).unwrap();
        assert!(rep.fractions[0] < 1e-3, "fraction {}", rep.fractions[0]);
        assert!(!rep.flags[0]);
        // above target Nyquist
        let s = series(rate, tone(rate, 12.0, n));
        let rep = assess_aliasing(&s, 16.0).unwrap();
        assert!(rep.fractions[0] > 0.9);
        assert!(rep.flags[0]);
    }

    #[test]
    fn aliasing_fraction_white_noise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 8192;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rep = assess_aliasing(&series(64.0, x), 16.0).unwrap();
        let expected = 1.0 - 16.0 / 64.0;
        assert!(
            (rep.fractions[0] - expected).abs() < 0.1,
            "fraction {} expected ~{expected}",
            rep.fractions[0]
        );
    }

    #[test]
    fn aliasing_parameter_errors() {
        let s = series(14.3, vec![0.0; 4]);
        assert!(assess_aliasing(&s, 1.0).is_err()); // too short
        let s = series(14.3, vec![0.0; 64]);
        assert!(assess_aliasing(&s, 20.0).is_err()); // target >= source
    }
}
