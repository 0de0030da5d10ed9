//! Core data carriers: sampled multichannel series and rig experiments.

use crate::error::{Error, Result};

/// Names of the five user-accessible feature channels, in column order.
pub const FEATURE_NAMES: [&str; 5] = [
    "apparent_mf_main",
    "apparent_mf_liquid",
    "temp_main",
    "temp_liquid",
    "pressure",
];

/// Number of feature channels fed to the models.
pub const NUM_FEATURES: usize = 5;

/// Index of the apparent combined mass flow within the feature channels.
pub const APPARENT_MF_MAIN: usize = 0;

/// Uniformly sampled multichannel series with an explicit sample rate.
///
/// `data[c][n]` is channel `c` at sample index `n`; all channels share one length.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSeries {
    pub sample_rate_hz: f64,
    pub data: Vec<Vec<f64>>,
}

impl SampledSeries {
    pub fn new(sample_rate_hz: f64, data: Vec<Vec<f64>>) -> Result<Self> {
        if sample_rate_hz <= 0.0 {
            return Err(Error::Parameter(format!(
                "sample_rate_hz must be positive, got {sample_rate_hz}"
            )));
        }
        if let Some(first) = data.first() {
            let n = first.len();
            if data.iter().any(|c| c.len() != n) {
                return Err(Error::Shape {
                    expected: format!("all channels of length {n}"),
                    actual: format!(
                        "lengths {:?}",
                        data.iter().map(|c| c.len()).collect::<Vec<_>>()
                    ),
                });
            }
        }
        Ok(SampledSeries {
            sample_rate_hz,
            data,
        })
    }

    pub fn num_channels(&self) -> usize {
        self.data.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.data.first().map_or(0, |c| c.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }
}

/// One rig operating point; ranges follow the flow-loop operating envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    /// Water fraction of the liquid phase, [0, 0.994].
    pub water_cut: f64,
    /// Liquid viscosity in mPa·s, [7.17e-4, 666].
    pub viscosity: f64,
    /// Oil mass flow rate in kg/h, [10.6, 12900].
    pub oil_mass_flow: f64,
    /// Overall mass flow rate in kg/h, [930, 14900].
    pub total_mass_flow: f64,
    /// Gas volume fraction, [0, 0.955].
    pub gvf: f64,
    /// Base pressure in bar, [1.01, 4.49].
    pub pressure_base: f64,
    /// Base temperature in °C, [19.2, 35.7].
    pub temperature_base: f64,
}

impl OperatingPoint {
    pub fn validate(&self) -> Result<()> {
        let checks: [(&str, f64, f64, f64); 7] = [
            ("water_cut", self.water_cut, 0.0, 0.994),
            ("viscosity", self.viscosity, 7.17e-4, 666.0),
            ("oil_mass_flow", self.oil_mass_flow, 10.6, 12900.0),
            ("total_mass_flow", self.total_mass_flow, 930.0, 14900.0),
            ("gvf", self.gvf, 0.0, 0.955),
            ("pressure_base", self.pressure_base, 1.01, 4.49),
            ("temperature_base", self.temperature_base, 19.2, 35.7),
        ];
        for (name, v, lo, hi) in checks {
            if !v.is_finite() || v < lo || v > hi {
                return Err(Error::Validation(format!(
                    "{name} = {v} outside [{lo}, {hi}]"
                )));
            }
        }
        if self.oil_mass_flow > self.total_mass_flow {
            return Err(Error::Validation(format!(
                "oil_mass_flow {} exceeds total_mass_flow {}",
                self.oil_mass_flow, self.total_mass_flow
            )));
        }
        Ok(())
    }
}

/// One ~60 s recording at a fixed operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    /// Chronological group id, starting at 1.
    pub group_id: u32,
    pub op: OperatingPoint,
    pub duration_s: f64,
    /// The five feature channels, ordered per [`FEATURE_NAMES`].
    pub channels: SampledSeries,
    /// Single channel: true overall mass flow in kg/h.
    pub truth: SampledSeries,
}

impl Experiment {
    pub fn num_samples(&self) -> usize {
        self.channels.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.op.validate()?;
        if self.channels.num_channels() != NUM_FEATURES {
            return Err(Error::Shape {
                expected: format!("{NUM_FEATURES} feature channels"),
                actual: format!("{}", self.channels.num_channels()),
            });
        }
        if self.truth.num_channels() != 1 || self.truth.len() != self.channels.len() {
            return Err(Error::Shape {
                expected: format!("1 truth channel of length {}", self.channels.len()),
                actual: format!(
                    "{} channels of length {}",
                    self.truth.num_channels(),
                    self.truth.len()
                ),
            });
        }
        if self.truth.data[0].iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Validation(format!(
                "group {}: true_total_mf must be positive everywhere",
                self.group_id
            )));
        }
        Ok(())
    }
}
