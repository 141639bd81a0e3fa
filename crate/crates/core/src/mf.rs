//! Matched-filter estimation of delay, and of delay and Doppler jointly.
//!
//! The received phase is φ(t) = 2π[ψ(t) − ψ(t−τ) + f t] plus a constant,
//! where ψ is the periodic part of the transmitted phase. Dividing out
//! exp(j2πψ(t)) leaves a correlation of the data against exp(j2πψ(t−τ)),
//! which is evaluated for every delay on the fine grid m/(M f_s) with one
//! FFT per Doppler candidate. The data are zero-stuffed onto the fine grid
//! so the grid values are the exact objective.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimate::{Diagnostics, Estimate, Method};
use crate::exec::Exec;
use crate::numerics::{maximize_scalar_bounded, maximize_simplex, wrap, FftPair, SimplexOptions};
use crate::signal::Measurement;
use crate::waveform::ModulationWaveform;

/// Default cap on M·N² for the joint search.
pub const DEFAULT_GRID_CAP: f64 = 2e9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedFilterGrid {
    /// Upsampling factor M = ⌈B/f_s⌉.
    pub upsample: usize,
    pub num_samples: usize,
    pub sampling_rate: f64,
}

impl MatchedFilterGrid {
    pub fn new(w: &ModulationWaveform, fs: f64, n: usize) -> Self {
        Self { upsample: ((w.bandwidth() / fs).ceil() as usize).max(1), num_samples: n, sampling_rate: fs }
    }

    pub fn delay_step(&self) -> f64 {
        1.0 / (self.upsample as f64 * self.sampling_rate)
    }

    pub fn doppler_step(&self) -> f64 {
        self.sampling_rate / self.num_samples as f64
    }

    pub fn num_delays(&self) -> usize {
        self.upsample * self.num_samples
    }

    /// Grid points in the joint search, M·N².
    pub fn joint_size(&self) -> f64 {
        self.upsample as f64 * (self.num_samples as f64).powi(2)
    }
}

/// |Σ u(t_n) exp(−jφ(t_n; τ, f))|².
pub fn mf_objective(u: &[Complex64], w: &ModulationWaveform, fs: f64, tau: f64, f: f64) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, &v) in u.iter().enumerate() {
        let cyc = w.interference_phase_cycles(tau, f, i as f64 / fs);
        acc += v * Complex64::from_polar(1.0, -2.0 * PI * cyc);
    }
    acc.norm_sqr()
}

/// Precomputed delay-correlation machinery for one waveform and window.
struct Correlator {
    grid: MatchedFilterGrid,
    /// exp(−j2πψ(t_n)) on the sample grid.
    demod: Vec<Complex64>,
    circular: bool,
    fft_n: FftPair,
    fft_big: FftPair,
    /// Conjugated spectrum of the conjugated template.
    template_spec: Vec<Complex64>,
}

impl Correlator {
    fn new(w: &ModulationWaveform, fs: f64, n: usize) -> Self {
        let grid = MatchedFilterGrid::new(w, fs, n);
        let mn = grid.num_delays();
        let fine = grid.delay_step();
        let periods = n as f64 / fs / w.period();
        let circular = (periods - periods.round()).abs() < 1e-9 * periods.max(1.0) && periods.round() >= 1.0;
        let demod = (0..n).map(|i| Complex64::from_polar(1.0, -2.0 * PI * w.periodic_phase(i as f64 / fs))).collect();

        // circular: template over one window; linear: delays j - m in (-MN, MN)
        let (big, offset) = if circular { (mn, 0) } else { (2 * mn + 1, mn) };
        let tlen = if circular { mn } else { 2 * mn };
        let mut tmpl = vec![Complex64::new(0.0, 0.0); big];
        for (i, slot) in tmpl.iter_mut().enumerate().take(tlen) {
            let t = (i as f64 - offset as f64) * fine;
            let z = Complex64::from_polar(1.0, 2.0 * PI * w.periodic_phase(t));
            *slot = if circular { z.conj() } else { z };
        }
        let fft_big = FftPair::new(big);
        fft_big.forward(&mut tmpl);
        if circular {
            tmpl.iter_mut().for_each(|v| *v = v.conj());
        }
        Self { grid, demod, circular, fft_n: FftPair::new(n), fft_big, template_spec: tmpl }
    }

    /// Spectrum of the demodulated data at zero Doppler.
    fn base_spectrum(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut y: Vec<Complex64> = u.iter().zip(&self.demod).map(|(a, b)| a * b).collect();
        self.fft_n.forward(&mut y);
        y
    }

    /// |C(m)|² for every fine delay index, with the Doppler shift applied as
    /// a circular shift of `base` by `shift` bins.
    fn profile(&self, base: &[Complex64], shift: usize) -> Vec<f64> {
        let n = self.grid.num_samples;
        let mn = self.grid.num_delays();
        if self.circular {
            // the spectrum of the zero-stuffed sequence is the N-point spectrum tiled M times
            let mut buf: Vec<Complex64> = (0..mn).map(|j| base[(j + shift) % n] * self.template_spec[j]).collect();
            self.fft_big.inverse.process(&mut buf);
            let s = 1.0 / mn as f64;
            buf.iter().map(|v| (v * s).norm_sqr()).collect()
        } else {
            // linear correlation: D(k) = Σ_j Y_j b_{j+k}, C(m) = D(MN - m)
            let big = self.fft_big.len();
            let mut y = vec![Complex64::new(0.0, 0.0); n];
            for (k, slot) in y.iter_mut().enumerate() {
                *slot = base[(k + shift) % n];
            }
            self.fft_n.inverse.process(&mut y);
            let scale = 1.0 / n as f64;
            let mut p = vec![Complex64::new(0.0, 0.0); big];
            for (i, v) in y.iter().enumerate() {
                p[i * self.grid.upsample] = (v * scale).conj();
            }
            self.fft_big.forward(&mut p);
            let mut buf: Vec<Complex64> = p.iter().zip(&self.template_spec).map(|(a, b)| a.conj() * b).collect();
            self.fft_big.inverse.process(&mut buf);
            let s = 1.0 / big as f64;
            (0..mn).map(|m| (buf[mn - m] * s).norm_sqr()).collect()
        }
    }
}

/// Objective |C(m)|² on the fine delay grid τ = m/(M f_s) at Doppler `f`,
/// `f` rounded to the nearest multiple of f_s/N.
pub fn mf_delay_profile(u: &[Complex64], w: &ModulationWaveform, fs: f64, f: f64) -> Vec<f64> {
    let c = Correlator::new(w, fs, u.len());
    let base = c.base_spectrum(u);
    let n = u.len() as i64;
    let shift = ((f / c.grid.doppler_step()).round() as i64).rem_euclid(n) as usize;
    c.profile(&base, shift)
}

fn argmax_first(values: &[f64]) -> (usize, f64) {
    values.iter().enumerate().fold((0, f64::MIN), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
}

fn reduce_tau(tau: f64, w: &ModulationWaveform) -> f64 {
    let r = tau.rem_euclid(w.period());
    if r >= w.period() {
        0.0
    } else {
        r
    }
}

/// Zero-Doppler delay estimate: FFT correlation on the fine grid, then a
/// bounded scalar refinement within one fine cell either side.
pub fn mf_distance(m: &Measurement, w: &ModulationWaveform) -> Result<Estimate> {
    let fs = m.sample_rate();
    if m.len() < 2 {
        return Err(Error::InvalidArgument("mf_distance: need at least two samples".into()));
    }
    let c = Correlator::new(w, fs, m.len());
    let base = c.base_spectrum(&m.u);
    let profile = c.profile(&base, 0);
    let (idx, _) = argmax_first(&profile);
    let step = c.grid.delay_step();
    let tau0 = idx as f64 * step;
    let r = maximize_scalar_bounded(|tau| mf_objective(&m.u, w, fs, tau, 0.0), tau0 - step, tau0 + step, tau0, 1e-15)?;
    let diag = Diagnostics { iterations: r.iterations, starts_tried: 1, chosen_start: Some((tau0, 0.0)), converged: r.converged, notes: Vec::new() };
    Ok(Estimate::new(reduce_tau(r.x[0], w), 0.0, w.center_frequency(), r.value, Method::MatchedFilter, diag))
}

/// Joint delay–Doppler estimate over the full M·N² grid, then a simplex
/// refinement boxed by the neighbouring grid points.
pub fn mf_joint(m: &Measurement, w: &ModulationWaveform, exec: Exec) -> Result<Estimate> {
    mf_joint_with_cap(m, w, exec, DEFAULT_GRID_CAP)
}

pub fn mf_joint_with_cap(m: &Measurement, w: &ModulationWaveform, exec: Exec, cap: f64) -> Result<Estimate> {
    let fs = m.sample_rate();
    let n = m.len();
    if n < 2 {
        return Err(Error::InvalidArgument("mf_joint: need at least two samples".into()));
    }
    let grid = MatchedFilterGrid::new(w, fs, n);
    if grid.joint_size() > cap {
        return Err(Error::ResourceLimit(format!(
            "joint matched filter needs M·N² = {:.3e} grid points (cap {cap:.3e}); use the distance-only matched filter",
            grid.joint_size()
        )));
    }
    let c = Correlator::new(w, fs, n);
    let base = c.base_spectrum(&m.u);
    // Doppler bins ℓ covering (−f_s/2, f_s/2]
    let half = (n / 2) as i64;
    let lo = half + 1 - n as i64;
    let bins: Vec<i64> = (lo..=half).collect();
    let best_per_bin = exec.map(&bins, |&l| {
        let shift = l.rem_euclid(n as i64) as usize;
        let (idx, v) = argmax_first(&c.profile(&base, shift));
        (idx, v)
    });
    let step_tau = grid.delay_step();
    let step_f = grid.doppler_step();
    let mut best: Option<(f64, f64, f64)> = None;
    for (&l, &(idx, v)) in bins.iter().zip(&best_per_bin) {
        let tau = idx as f64 * step_tau;
        let f = l as f64 * step_f;
        let better = match best {
            None => true,
            Some((bt, bf, bv)) => v > bv || (v == bv && (tau < bt || (tau == bt && f.abs() < bf.abs()))),
        };
        if better {
            best = Some((tau, f, v));
        }
    }
    let (tau0, f0, _) = best.expect("at least one Doppler bin");
    let obj = |x: &[f64]| mf_objective(&m.u, w, fs, x[0] * step_tau, x[1] * step_f);
    let x0 = [tau0 / step_tau, f0 / step_f];
    let lower = [x0[0] - 1.0, x0[1] - 1.0];
    let upper = [x0[0] + 1.0, x0[1] + 1.0];
    let r = maximize_simplex(obj, &x0, &lower, &upper, SimplexOptions { tol: 1e-12, max_iter: 2000, initial_step: 0.25 })?;
    let diag = Diagnostics {
        iterations: r.iterations,
        starts_tried: bins.len(),
        chosen_start: Some((tau0, f0)),
        converged: r.converged,
        notes: Vec::new(),
    };
    Ok(Estimate::new(
        reduce_tau(r.x[0] * step_tau, w),
        wrap(r.x[1] * step_f, fs),
        w.center_frequency(),
        r.value,
        Method::MatchedFilterJoint,
        diag,
    ))
}
