//! Annealed multi-start maximization of L_IFF.

use crate::error::{invalid, Error, Result};
use crate::estimate::{Diagnostics, Estimate, Method};
use crate::exec::Exec;
use crate::numerics::{maximize_quasi_newton, wrap, QuasiNewtonOptions};
use crate::signal::Measurement;
use crate::waveform::ModulationWaveform;

use super::calibration::{estimate_snr, sigma_hat, HTable, NoiseCalibration};
use super::extract::extract_if;
use super::landscape::{initial_lattice, LatticeMode};
use super::likelihood::IffProblem;

/// Smallest σ² handed to the likelihood.
pub const SIGMA2_FLOOR: f64 = 1e-10;
/// Starting σ² of the annealing schedule unless σ̂² is larger.
pub const SIGMA2_RELAXED: f64 = 1e-2;

#[derive(Debug, Clone, Copy)]
pub struct IffOptions {
    /// Laser linewidth L, Hz.
    pub linewidth: f64,
    /// Wrapping truncation K; raised to ⌈3σ⌉ when needed.
    pub k: usize,
    pub gamma: f64,
    pub mode: LatticeMode,
    pub exec: Exec,
    /// Quasi-Newton iterations per annealing stage.
    pub max_iter: usize,
    /// Replaces σ̂² when set.
    pub sigma2_override: Option<f64>,
}

impl Default for IffOptions {
    fn default() -> Self {
        Self {
            linewidth: 100e3,
            k: 2,
            gamma: 0.9,
            mode: LatticeMode::DistanceOnly,
            exec: Exec::default(),
            max_iter: 200,
            sigma2_override: None,
        }
    }
}

/// σ₁² = max(σ̂², 10⁻²), σ₂² = √(σ₁²σ̂²), σ₃² = σ̂².
pub fn anneal_schedule(sigma2_hat: f64) -> [f64; 3] {
    let s3 = sigma2_hat.max(SIGMA2_FLOOR);
    let s1 = s3.max(SIGMA2_RELAXED);
    [s1, (s1 * s3).sqrt(), s3]
}

/// K for a given σ²: at least `k_min` and at least ⌈3σ⌉.
pub fn truncation_for(sigma2: f64, k_min: usize) -> usize {
    k_min.max((3.0 * sigma2.sqrt()).ceil() as usize).max(1)
}

/// SNR̂, σ̂² and K for a measurement. Notes collect any fallbacks taken.
pub fn calibrate(m: &Measurement, linewidth: f64, h: Option<&HTable>, k_min: usize, notes: &mut Vec<String>) -> Result<NoiseCalibration> {
    if !(linewidth >= 0.0) || !linewidth.is_finite() {
        return Err(invalid(format!("linewidth must be finite and non-negative, got {linewidth}")));
    }
    let fs = m.sample_rate();
    let (snr, sigma2) = match estimate_snr(&m.u, &m.v_aux) {
        Ok(snr) => {
            let h = h.ok_or_else(|| Error::MissingCalibration("an h table is required; run `fmcw hfit` first".into()))?;
            (Some(snr), sigma_hat(linewidth, fs, snr, h))
        }
        Err(Error::DegenerateInput(_)) => {
            notes.push("sum channel is noiseless; shot-noise variance taken as zero".into());
            (None, linewidth / (std::f64::consts::PI * fs))
        }
        Err(e) => return Err(e),
    };
    Ok(NoiseCalibration { snr_eta_hat: snr, sigma2_hat: sigma2, k: truncation_for(sigma2, k_min) })
}

struct StartResult {
    tau: f64,
    f: f64,
    value: f64,
    iterations: usize,
    converged: bool,
    start: (f64, f64),
}

fn reduce_delay(tau: f64, period: f64) -> f64 {
    let r = tau - period * (tau / period).floor();
    if r >= period || r < 0.0 {
        0.0
    } else {
        r
    }
}

/// IFF estimate of (τ, f), or of τ alone in distance-only mode.
pub fn iff_estimate(m: &Measurement, w: &ModulationWaveform, h: Option<&HTable>, opts: &IffOptions) -> Result<Estimate> {
    if !(opts.gamma > 0.0 && opts.gamma <= 1.0) {
        return Err(invalid(format!("gamma must lie in (0, 1], got {}", opts.gamma)));
    }
    if opts.k < 1 {
        return Err(invalid("K must be at least 1"));
    }
    let fs = m.sample_rate();
    let z = extract_if(&m.u, fs)?;
    let mut notes = Vec::new();
    if let Some(msg) = m.config.window_warning(w) {
        notes.push(msg);
    }
    let sigma2_hat = match opts.sigma2_override {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(invalid(format!("sigma2 override must be positive, got {s}"))),
        None => calibrate(m, opts.linewidth, h, opts.k, &mut notes)?.sigma2_hat,
    };
    if sigma2_hat < SIGMA2_FLOOR {
        notes.push(format!("sigma2 raised to the floor {SIGMA2_FLOOR:e}"));
    }
    let schedule = anneal_schedule(sigma2_hat);
    let lattice = initial_lattice(w, fs, opts.gamma, opts.mode, &z.times)?;
    let problem = IffProblem::new(&z, w);
    let n = problem.len() as f64;
    let (dtau, joint) = (lattice.delay_width, opts.mode == LatticeMode::Joint);

    let run = |&(tau0, f0): &(f64, f64)| -> StartResult {
        let mut x = if joint { vec![tau0 / dtau, f0 / fs] } else { vec![tau0 / dtau] };
        let mut iterations = 0;
        let mut converged = false;
        for &s2 in &schedule {
            let k = truncation_for(s2, opts.k);
            let scale = s2 / n;
            let qn = QuasiNewtonOptions { max_iter: opts.max_iter, max_step: Some(0.1), ..Default::default() };
            let r = maximize_quasi_newton(
                |x| {
                    let f = if joint { x[1] * fs } else { 0.0 };
                    let (v, g) = problem.loglik(x[0] * dtau, f, s2, k);
                    let grad = if joint { vec![g[0] * dtau * scale, g[1] * fs * scale] } else { vec![g[0] * dtau * scale] };
                    (v * scale, grad)
                },
                &x,
                &qn,
            );
            iterations += r.iterations;
            converged = r.converged;
            x = r.x;
        }
        let (tau, f) = (x[0] * dtau, if joint { x[1] * fs } else { 0.0 });
        let k = truncation_for(schedule[2], opts.k);
        StartResult {
            tau: reduce_delay(tau, w.period()),
            f: wrap(f, fs),
            value: problem.value(tau, f, schedule[2], k),
            iterations,
            converged,
            start: (tau0, f0),
        }
    };
    let results = opts.exec.map(&lattice.points, run);

    let better = |a: &StartResult, b: &StartResult| {
        if a.value != b.value {
            return a.value > b.value;
        }
        if a.tau != b.tau {
            return a.tau < b.tau;
        }
        a.f.abs() < b.f.abs()
    };
    let best = results
        .iter()
        .filter(|r| r.value.is_finite())
        .fold(None::<&StartResult>, |acc, r| match acc {
            Some(a) if !better(r, a) => Some(a),
            _ => Some(r),
        })
        .ok_or_else(|| Error::NumericFailure { message: "every start produced a non-finite objective".into(), last_point: vec![] })?;
    if !results.iter().any(|r| r.converged) {
        notes.push("no start met the convergence tolerance".into());
    }
    let diagnostics = Diagnostics {
        iterations: best.iterations,
        starts_tried: results.len(),
        chosen_start: Some(best.start),
        converged: best.converged,
        notes,
    };
    let method = if joint { Method::IffJoint } else { Method::Iff };
    Ok(Estimate::new(best.tau, best.f, w.center_frequency(), best.value, method, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iff::calibration::{default_snr_grid, h_fit};
    use crate::signal::{synth_measurement, synth_measurement_with, AcquisitionConfig, NoiseSwitches, Target};

    fn tri() -> ModulationWaveform {
        ModulationWaveform::triangular(500e6, 2e-6, 193e12).unwrap()
    }

    fn noiseless(w: &ModulationWaveform, d: f64, v: f64) -> Measurement {
        synth_measurement_with(w, &AcquisitionConfig::default(), &Target::new(d, v), 0, NoiseSwitches::NONE).unwrap()
    }

    #[test]
    fn schedule_is_decreasing() {
        let s = anneal_schedule(1.6e-4);
        assert_eq!(s[0], 1e-2);
        assert!((s[1] - (1e-2f64 * 1.6e-4).sqrt()).abs() < 1e-18);
        assert_eq!(s[2], 1.6e-4);
        assert_eq!(anneal_schedule(0.5), [0.5; 3]);
        assert_eq!(anneal_schedule(0.0)[2], SIGMA2_FLOOR);
        assert_eq!(truncation_for(1e-2, 2), 2);
        assert_eq!(truncation_for(1.0, 2), 3);
    }

    #[test]
    fn noiseless_distance_recovery() {
        // delays on the sample grid keep every corner on a sample boundary,
        // so each ζ_n averages an affine IF and the fit is exact
        let w = tri();
        let cell = crate::SPEED_OF_LIGHT / (2.0 * 200e6);
        for m in [20.0, 165.0, 444.0, 787.0] {
            let d = m * cell;
            let m = noiseless(&w, d, 0.0);
            let e = iff_estimate(&m, &w, None, &IffOptions { linewidth: 0.0, ..Default::default() }).unwrap();
            assert!((e.distance - d).abs() < 1e-6, "{d}: {}", e.distance);
            assert!(e.diagnostics.notes.iter().any(|n| n.contains("noiseless")));
        }
    }

    #[test]
    fn noiseless_joint_recovery_all_waveforms() {
        let waves = [
            tri(),
            ModulationWaveform::sinusoidal(500e6, 2e-6, 193e12).unwrap(),
            ModulationWaveform::smooth_stair(500e6, 2e-6, 193e12).unwrap(),
        ];
        // off-grid delays leave a midpoint-rule bias of a few millimetres
        for w in &waves {
            for (d, v) in [(77.7, 12.0), (412.0, -40.0)] {
                let m = noiseless(w, d, v);
                let opts = IffOptions { linewidth: 0.0, mode: LatticeMode::Joint, ..Default::default() };
                let e = iff_estimate(&m, w, None, &opts).unwrap();
                assert!((e.distance - d).abs() < 5e-3, "{:?} {d}: {}", w.kind(), e.distance);
                assert!((e.velocity - v).abs() < 5e-3, "{:?} {v}: {}", w.kind(), e.velocity);
                assert_eq!(e.diagnostics.starts_tried % 2, 0);
            }
        }
    }

    #[test]
    fn missing_table_is_an_error() {
        let w = tri();
        let m = synth_measurement(&w, &AcquisitionConfig::default(), &Target::new(50.0, 0.0), 1).unwrap();
        let r = iff_estimate(&m, &w, None, &IffOptions::default());
        assert!(matches!(r, Err(Error::MissingCalibration(_))));
    }

    #[test]
    fn noisy_estimate_is_deterministic_across_exec() {
        let w = tri();
        let h = h_fit(&default_snr_grid(), 2000, 4, Exec::Sequential).unwrap().table;
        let m = synth_measurement(&w, &AcquisitionConfig::default(), &Target::new(300.0, 0.0), 9).unwrap();
        let seq = iff_estimate(&m, &w, Some(&h), &IffOptions { exec: Exec::Sequential, ..Default::default() }).unwrap();
        let par = iff_estimate(&m, &w, Some(&h), &IffOptions::default()).unwrap();
        assert_eq!(seq, par);
        assert!((seq.distance - 300.0).abs() < 0.5, "{}", seq.distance);
    }

    #[test]
    fn delay_is_reduced_into_one_period() {
        assert_eq!(reduce_delay(4e-6, 4e-6), 0.0);
        assert!((reduce_delay(5e-6, 4e-6) - 1e-6).abs() < 1e-18);
        assert!((reduce_delay(-1e-6, 4e-6) - 3e-6).abs() < 1e-18);
    }
}
