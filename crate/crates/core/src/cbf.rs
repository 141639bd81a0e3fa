//! Constant-beat-frequency processing for triangular modulation, and the
//! phase-unwrapping estimator for sinusoidal modulation.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::estimate::{Diagnostics, Estimate, Method};
use crate::numerics::{maximize_quasi_newton, maximize_scalar_bounded, wrap, FftPair, QuasiNewtonOptions};
use crate::signal::Measurement;
use crate::waveform::{ModulationWaveform, WaveformKind};

/// Wrapped beat frequencies of the up- and down-chirp, Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeatFrequencies {
    pub f_b1: f64,
    pub f_b2: f64,
}

/// Which spectral estimator [`estimate_cbf`] uses per segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyEstimator {
    Periodogram,
    Lorentzian,
}

fn periodogram_at(seg: &[Complex64], f: f64, fs: f64) -> f64 {
    let step = Complex64::from_polar(1.0, -2.0 * PI * f / fs);
    let mut rot = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, &u) in seg.iter().enumerate() {
        // re-anchor the rotation to keep the recursion from drifting
        if i % 64 == 0 {
            rot = Complex64::from_polar(1.0, -2.0 * PI * f * i as f64 / fs);
        }
        acc += u * rot;
        rot *= step;
    }
    acc.norm_sqr()
}

fn power_spectrum(seg: &[Complex64]) -> Vec<f64> {
    let mut buf = seg.to_vec();
    FftPair::new(seg.len()).forward(&mut buf);
    buf.iter().map(|v| v.norm_sqr()).collect()
}

fn peak_bin(power: &[f64]) -> usize {
    // first maximum wins
    power
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |best, (k, &p)| if p > best.1 { (k, p) } else { best })
        .0
}

fn check_segment(seg: &[Complex64], min_len: usize, name: &str) -> Result<()> {
    if seg.len() < min_len {
        return Err(invalid(format!("{name}: segment needs at least {min_len} samples, got {}", seg.len())));
    }
    if seg.iter().all(|v| v.norm_sqr() == 0.0) {
        return Err(Error::DegenerateInput(format!("{name}: all-zero segment")));
    }
    Ok(())
}

/// Frequency in `(-f_s/2, f_s/2]` maximizing the periodogram: DFT peak
/// followed by a bounded scalar refinement within one bin.
pub fn max_periodogram(seg: &[Complex64], fs: f64) -> Result<f64> {
    check_segment(seg, 4, "max_periodogram")?;
    let n = seg.len();
    let k = peak_bin(&power_spectrum(seg));
    let bin = fs / n as f64;
    let f0 = k as f64 * bin;
    let res = maximize_scalar_bounded(|f| periodogram_at(seg, f, fs), f0 - bin, f0 + bin, f0, 1e-10 * fs)?;
    Ok(wrap(res.x[0], fs))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianFit {
    pub center: f64,
    pub half_width: f64,
    pub amplitude: f64,
    /// True when the fit diverged and `center` is the periodogram estimate.
    pub fallback: bool,
}

const LORENTZ_HALF_WINDOW: i64 = 10;

/// Center of a Lorentzian fitted to the periodogram in log power over
/// ±10 bins around the peak.
pub fn lorentzian_fit(seg: &[Complex64], fs: f64) -> Result<LorentzianFit> {
    check_segment(seg, 16, "lorentzian_fit")?;
    let n = seg.len();
    let power = power_spectrum(seg);
    let k0 = peak_bin(&power);
    let bin = fs / n as f64;
    let f_peak = max_periodogram(seg, fs)?;
    // peak position in bins relative to k0, unwrapped through the Nyquist seam
    let c0 = wrap(f_peak - k0 as f64 * bin, fs) / bin;

    let peak = power[k0];
    let floor = peak * 1e-6 + f64::MIN_POSITIVE;
    let pts: Vec<(f64, f64)> = (-LORENTZ_HALF_WINDOW..=LORENTZ_HALF_WINDOW)
        .map(|j| {
            let idx = (k0 as i64 + j).rem_euclid(n as i64) as usize;
            (j as f64, (power[idx] + floor).ln())
        })
        .collect();

    // parameters: center (bins), ln half-width (bins), ln amplitude
    let fit = |x: &[f64]| -> (f64, Vec<f64>) {
        let (c, lw, la) = (x[0], x[1], x[2]);
        let w = lw.exp();
        let mut sse = 0.0;
        let mut g = [0.0; 3];
        for &(j, y) in &pts {
            let z = (j - c) / w;
            let q = 1.0 + z * z;
            let r = la - q.ln() - y;
            sse += r * r;
            // dr/dc = 2z/(w q), dr/dlw = 2z²/q, dr/dla = 1
            g[0] += 2.0 * r * 2.0 * z / (w * q);
            g[1] += 2.0 * r * 2.0 * z * z / q;
            g[2] += 2.0 * r;
        }
        (-sse, vec![-g[0], -g[1], -g[2]])
    };
    let x0 = [c0, 0.0, (peak + floor).ln()];
    let opts = QuasiNewtonOptions { grad_tol: 1e-10, step_tol: 1e-14, max_iter: 500, max_step: Some(2.0) };
    let r = maximize_quasi_newton(fit, &x0, &opts);
    let (c, lw, la) = (r.x[0], r.x[1], r.x[2]);
    let ok = r.value.is_finite() && c.is_finite() && c.abs() <= LORENTZ_HALF_WINDOW as f64 && lw.is_finite();
    if !ok {
        return Ok(LorentzianFit { center: f_peak, half_width: f64::NAN, amplitude: f64::NAN, fallback: true });
    }
    Ok(LorentzianFit {
        center: wrap((k0 as f64 + c) * bin, fs),
        half_width: lw.exp() * bin,
        amplitude: la.exp(),
        fallback: false,
    })
}

/// Maps wrapped complex beat frequencies to (τ, f) on the rectangular
/// unambiguous space. Translation cases are tested in order.
pub fn cbf_to_params_complex(bf: BeatFrequencies, bandwidth: f64, chirp_duration: f64, fs: f64) -> (f64, f64) {
    let (f1, f2) = (bf.f_b1, bf.f_b2);
    let sum = f1 + f2;
    let inside = sum <= 0.5 * fs && sum >= -0.5 * fs;
    let (g1, g2) = if f1 > f2 && inside {
        (f1, f2)
    } else if f1 <= f2 && inside {
        (f1 + fs, f2 - fs)
    } else if sum > 0.5 * fs {
        (f1, f2 - fs)
    } else {
        (f1 + fs, f2)
    };
    let k = 0.5 * chirp_duration / bandwidth;
    (k * (g1 - g2), 0.5 * (g1 + g2))
}

/// Real-signal mapping from non-negative beat frequencies.
pub fn cbf_to_params_real(f_b1: f64, f_b2: f64, bandwidth: f64, chirp_duration: f64) -> (f64, f64) {
    (0.5 * chirp_duration / bandwidth * (f_b1 + f_b2), 0.5 * (f_b1 - f_b2))
}

/// Beat frequencies from `[0, T)` and `[T, 2T)` of every whole period,
/// mapped to (τ, f) per period and averaged.
pub fn estimate_cbf(m: &Measurement, w: &ModulationWaveform, est: FrequencyEstimator) -> Result<Estimate> {
    if w.kind() != WaveformKind::Triangular {
        let method = match est {
            FrequencyEstimator::Periodogram => "periodogram",
            FrequencyEstimator::Lorentzian => "lorentzian",
        };
        return Err(Error::UnsupportedModulation { method: method.into(), kind: w.kind().name().into() });
    }
    let fs = m.sample_rate();
    let (tc, period) = (w.chirp_duration(), w.period());
    let periods = (m.len() as f64 / fs / period + 1e-9).floor() as usize;
    if periods == 0 {
        return Err(invalid("estimate_cbf: observation shorter than one modulation period"));
    }
    let index_at = |t: f64| ((t * fs - 1e-9).ceil().max(0.0) as usize).min(m.len());
    let mut diag = Diagnostics { converged: true, ..Default::default() };
    let mut beats = Vec::with_capacity(periods);
    let (mut tau_sum, mut f_sum) = (0.0, 0.0);
    for p in 0..periods {
        let start = p as f64 * period;
        let (a, b, c) = (index_at(start), index_at(start + tc), index_at(start + period));
        let mut one = |seg: &[Complex64]| -> Result<f64> {
            match est {
                FrequencyEstimator::Periodogram => max_periodogram(seg, fs),
                FrequencyEstimator::Lorentzian => {
                    let fit = lorentzian_fit(seg, fs)?;
                    if fit.fallback {
                        diag.converged = false;
                        diag.notes.push(format!("lorentzian fit diverged in period {p}; periodogram value used"));
                    }
                    Ok(fit.center)
                }
            }
        };
        let bf = BeatFrequencies { f_b1: one(&m.u[a..b])?, f_b2: one(&m.u[b..c])? };
        let (tau, f) = cbf_to_params_complex(bf, w.bandwidth(), tc, fs);
        beats.push(bf);
        tau_sum += tau;
        f_sum += f;
    }
    diag.iterations = periods;
    let method = match est {
        FrequencyEstimator::Periodogram => Method::Periodogram,
        FrequencyEstimator::Lorentzian => Method::Lorentzian,
    };
    let k = periods as f64;
    Ok(Estimate::new(tau_sum / k, f_sum / k, w.center_frequency(), f64::NAN, method, diag))
}

/// Cumulative phase unwrap with a ±π jump threshold.
pub fn unwrap_phase(u: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(u.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for v in u {
        let a = v.arg();
        if let Some(p) = prev {
            let d = a - p;
            if d > PI {
                offset -= 2.0 * PI;
            } else if d < -PI {
                offset += 2.0 * PI;
            }
        }
        prev = Some(a);
        out.push(a + offset);
    }
    out
}

/// Sinusoidal-modulation estimator from the mean IF and the mean absolute
/// de-trended unwrapped phase. Breaks down once the IF exceeds Nyquist.
pub fn tsuchida_estimate(m: &Measurement, w: &ModulationWaveform) -> Result<Estimate> {
    if w.kind() != WaveformKind::Sinusoidal {
        return Err(Error::UnsupportedModulation { method: "tsuchida".into(), kind: w.kind().name().into() });
    }
    let n = m.len();
    if n < 2 {
        return Err(invalid("tsuchida_estimate: need at least two samples"));
    }
    let fs = m.sample_rate();
    let mean_if = m.u.windows(2).map(|p| (p[1] * p[0].conj()).arg()).sum::<f64>() / (2.0 * PI * (n - 1) as f64);
    let f_hat = fs * mean_if;
    let phase = unwrap_phase(&m.u);
    let r: Vec<f64> = phase.iter().enumerate().map(|(i, p)| p - 2.0 * PI * f_hat * i as f64 / fs).collect();
    // centering drops the constant carrier offset 2πf_cτ
    let mean_r = r.iter().sum::<f64>() / n as f64;
    let mean_abs = r.iter().map(|x| (x - mean_r).abs()).sum::<f64>() / n as f64;
    // (π/T)∫₀^{2T}|a - f_c| dt for the sinusoid is 2B
    let norm = 2.0 * w.bandwidth();
    let tau = mean_abs / norm;
    let diag = Diagnostics { converged: true, iterations: 1, ..Default::default() };
    Ok(Estimate::new(tau, f_hat, w.center_frequency(), f64::NAN, Method::Tsuchida, diag))
}
