//! FMCW lidar simulation and beyond-Nyquist parameter estimation.
//!
//! The crate covers the measurement model (modulation waveforms, laser
//! phase noise, shot noise), conventional beat-frequency estimators, matched
//! filtering, instantaneous-frequency fitting and the associated
//! Cramér–Rao style bounds.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod numerics;
pub mod rng;
pub mod waveform;
pub mod signal;
pub mod estimate;
pub mod cbf;
pub mod mf;
pub mod iff;
pub mod bounds;
pub mod sweep;

pub use error::{Error, Result};
pub use exec::Exec;
pub use waveform::{ModulationWaveform, WaveformKind};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Elementary charge, C.
pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;
