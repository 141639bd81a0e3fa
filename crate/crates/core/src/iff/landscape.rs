//! Basin geometry of the IFF objective and the multi-start lattice.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::waveform::{ModulationWaveform, WaveformKind};

/// Number of scan steps per period used by [`rhombus_numeric`].
pub const RHOMBUS_SCAN_STEPS: usize = 4096;

/// Which parameters the lattice spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeMode {
    /// Delay only, Doppler fixed at zero.
    DistanceOnly,
    /// Delay and Doppler.
    Joint,
}

/// Closed-form basin width Δτ and height Δf, when one exists.
pub fn rhombus_closed_form(w: &ModulationWaveform, fs: f64) -> Option<(f64, f64)> {
    let (b, t) = (w.bandwidth(), w.chirp_duration());
    let dtau = match w.kind() {
        WaveformKind::Triangular => fs * t / b,
        WaveformKind::Sinusoidal => {
            let x = fs / (2.0 * b);
            if x >= 1.0 {
                2.0 * t
            } else {
                x.asin() * 4.0 * t / PI
            }
        }
        _ => return None,
    };
    Some((dtau.min(2.0 * t), fs))
}

/// Basin size from a scan of the aliasing condition around (T, 0).
///
/// The half-width along τ is the first δ at which
/// max_n |g̃_{T,0}(t′_n) − g̃_{T+δ,0}(t′_n)| reaches 1/2; along f the
/// condition reduces to |f|/f_s = 1/2. Both are doubled.
pub fn rhombus_numeric(w: &ModulationWaveform, fs: f64, times: &[f64]) -> Result<(f64, f64)> {
    rhombus_numeric_with_step(w, fs, times, w.period() / RHOMBUS_SCAN_STEPS as f64)
}

pub fn rhombus_numeric_with_step(w: &ModulationWaveform, fs: f64, times: &[f64], step: f64) -> Result<(f64, f64)> {
    if times.is_empty() {
        return Err(invalid("rhombus_numeric: empty time grid"));
    }
    if !(step > 0.0) || !(fs > 0.0) {
        return Err(invalid("rhombus_numeric: step and f_s must be positive"));
    }
    let t = w.chirp_duration();
    let base: Vec<f64> = times.iter().map(|&x| w.deviation(x - t)).collect();
    let gap = |delta: f64| {
        times.iter().zip(&base).map(|(&x, &a0)| ((w.deviation(x - t - delta) - a0) / fs).abs()).fold(0.0, f64::max)
    };
    let limit = (w.period() / step).ceil() as usize;
    for i in 1..=limit {
        let delta = i as f64 * step;
        if gap(delta) >= 0.5 {
            if i == 1 {
                return Err(Error::Resolution(format!(
                    "aliasing condition met at the first scan step ({step:e} s); use a finer step"
                )));
            }
            return Ok(((2.0 * delta).min(w.period()), fs));
        }
    }
    Ok((w.period(), fs))
}

/// Start points for the multi-start search.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    /// (τ₀, f₀) pairs.
    pub points: Vec<(f64, f64)>,
    pub delay_width: f64,
    pub doppler_width: f64,
    /// Delay spacing actually used, 2T / columns.
    pub spacing: f64,
    pub columns: usize,
}

/// Lattice over (0, 2T] × (−f_s/2, f_s/2] with delay spacing at most γΔτ.
///
/// Distance-only mode uses one row at f = 0 with columns at (i + ½)s. Joint
/// mode adds a second row at f = f_s/2 offset by s/2, so every basin of
/// width Δτ and height f_s holds at least one start.
pub fn initial_lattice(w: &ModulationWaveform, fs: f64, gamma: f64, mode: LatticeMode, times: &[f64]) -> Result<Lattice> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(invalid(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let (dtau, dfreq) = match rhombus_closed_form(w, fs) {
        Some(v) => v,
        None => rhombus_numeric(w, fs, times)?,
    };
    let period = w.period();
    let columns = (period / (gamma * dtau) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let s = period / columns as f64;
    let mut points: Vec<(f64, f64)> = (0..columns).map(|i| ((i as f64 + 0.5) * s, 0.0)).collect();
    if mode == LatticeMode::Joint {
        points.extend((0..columns).map(|i| ((i + 1) as f64 * s, 0.5 * fs)));
    }
    Ok(Lattice { points, delay_width: dtau, doppler_width: dfreq, spacing: s, columns })
}
