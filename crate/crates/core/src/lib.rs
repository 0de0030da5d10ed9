//! Coriolis mass flowmeter multiphase correction pipeline.
//!
//! Synthetic three-phase rig data, anti-aliasing decimation, from-scratch
//! windowed MLP and 1D-CNN regressors, group-aware leakage-free splits, and a
//! full relative-error evaluation suite.

pub mod config;
pub mod dataset_io;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod nn;
pub mod pipeline;
pub mod report;
pub mod trainer;
pub mod splits;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
