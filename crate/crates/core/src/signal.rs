//! Measurement model: lidar power budget, laser phase noise, shot noise and
//! synthesis of the complex interference signal u(t) plus the sum channel.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::rng::{derive_seed, rng_from_seed, STREAM_PHASE_NOISE, STREAM_SHOT_U, STREAM_SHOT_V};
use crate::waveform::ModulationWaveform;
use crate::{ELECTRON_CHARGE, SPEED_OF_LIGHT};

/// Default optical carrier, 1550 nm.
pub const DEFAULT_CENTER_FREQUENCY: f64 = SPEED_OF_LIGHT / 1550e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionConfig {
    /// Sampling rate f_s, Hz.
    pub sampling_rate: f64,
    pub num_samples: usize,
    /// Laser linewidth L, Hz.
    pub linewidth: f64,
    pub transmit_power: f64,
    pub lo_power: f64,
    /// Receiver aperture area, m².
    pub aperture_area: f64,
    pub reflectivity: f64,
    /// Photodiode responsivity, A/W.
    pub responsivity: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            sampling_rate: 200e6,
            num_samples: 800,
            linewidth: 100e3,
            transmit_power: 1e-3,
            lo_power: 1e-3,
            aperture_area: 1e-6,
            reflectivity: 0.01,
            responsivity: 1.0,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_rate > 0.0 && self.sampling_rate.is_finite()) {
            return Err(invalid("sampling rate must be positive"));
        }
        if self.num_samples < 2 {
            return Err(invalid("num_samples must be at least 2"));
        }
        if !(self.linewidth >= 0.0 && self.linewidth.is_finite()) {
            return Err(invalid("linewidth must be non-negative"));
        }
        for (name, v) in [
            ("transmit_power", self.transmit_power),
            ("lo_power", self.lo_power),
            ("aperture_area", self.aperture_area),
            ("responsivity", self.responsivity),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be non-negative")));
            }
        }
        if !(0.0..=1.0).contains(&self.reflectivity) {
            return Err(invalid("reflectivity must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.sampling_rate
    }

    pub fn sample_time(&self, n: usize) -> f64 {
        n as f64 / self.sampling_rate
    }

    pub fn sample_times(&self) -> Vec<f64> {
        (0..self.num_samples).map(|n| self.sample_time(n)).collect()
    }

    /// Observation window N/f_s, s.
    pub fn window(&self) -> f64 {
        self.num_samples as f64 / self.sampling_rate
    }

    /// Observation window in units of the modulation period.
    pub fn periods(&self, w: &ModulationWaveform) -> f64 {
        self.window() / w.period()
    }

    /// A warning when the window is not a whole number of periods.
    pub fn window_warning(&self, w: &ModulationWaveform) -> Option<String> {
        let p = self.periods(w);
        ((p - p.round()).abs() > 1e-9 * p.max(1.0))
            .then(|| format!("observation window spans {p:.6} modulation periods, not a whole number"))
    }
}

/// Point target at distance `distance` moving with `velocity` (positive
/// away from the sensor).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub distance: f64,
    pub velocity: f64,
}

impl Target {
    pub fn new(distance: f64, velocity: f64) -> Self {
        Self { distance, velocity }
    }

    pub fn delay(&self) -> f64 {
        2.0 * self.distance / SPEED_OF_LIGHT
    }

    pub fn doppler(&self, center_frequency: f64) -> f64 {
        2.0 * self.velocity * center_frequency / SPEED_OF_LIGHT
    }
}

pub fn delay_to_distance(tau: f64) -> f64 {
    tau * SPEED_OF_LIGHT / 2.0
}

pub fn distance_to_delay(d: f64) -> f64 {
    2.0 * d / SPEED_OF_LIGHT
}

pub fn doppler_to_velocity(f: f64, center_frequency: f64) -> f64 {
    f * SPEED_OF_LIGHT / (2.0 * center_frequency)
}

pub fn velocity_to_doppler(v: f64, center_frequency: f64) -> f64 {
    2.0 * v * center_frequency / SPEED_OF_LIGHT
}

/// Two-way lidar equation for a fronto-parallel Lambertian target without
/// atmospheric loss.
pub fn received_power(cfg: &AcquisitionConfig, d: f64) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(invalid(format!("distance must be positive, got {d}")));
    }
    Ok(cfg.transmit_power * cfg.responsivity * cfg.aperture_area * cfg.reflectivity / (PI * d * d))
}

/// Signal amplitude A₁ and sum-channel level A₂ at distance `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitudes {
    pub a1: f64,
    pub a2: f64,
}

impl Amplitudes {
    pub fn at(cfg: &AcquisitionConfig, d: f64) -> Result<Self> {
        let p_rx = received_power(cfg, d)?;
        Ok(Self {
            a1: 2.0 * cfg.responsivity * (cfg.lo_power * p_rx).sqrt(),
            a2: cfg.responsivity * (cfg.lo_power + p_rx),
        })
    }

    /// Per-quadrature shot-noise variance q·A₂.
    pub fn noise_variance(&self) -> f64 {
        ELECTRON_CHARGE * self.a2
    }

    /// SNR with respect to the amplitude, A₁²/(2qA₂).
    pub fn snr(&self) -> f64 {
        self.a1 * self.a1 / (2.0 * self.noise_variance())
    }
}

/// SNR_η at distance `d` from the lidar equation.
pub fn snr_eta(cfg: &AcquisitionConfig, d: f64) -> Result<f64> {
    Ok(Amplitudes::at(cfg, d)?.snr())
}

/// Differenced laser phase noise ξ_n = ω(t_n) − ω(t_n − τ), where ω is a
/// Wiener process with increment variance 2πL per second. ω is drawn on the
/// merged grid of both time sets so no interpolation is involved.
pub fn simulate_phase_noise(linewidth: f64, tau: f64, fs: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(linewidth >= 0.0) || !(tau >= 0.0) || !(fs > 0.0) {
        return Err(invalid("simulate_phase_noise: need L >= 0, tau >= 0, fs > 0"));
    }
    if linewidth == 0.0 || tau == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut rng = rng_from_seed(seed);
    // times t_n - tau (tag 1) and t_n (tag 0), merged in sorted order
    let mut events: Vec<(f64, u8, usize)> = Vec::with_capacity(2 * n);
    for i in 0..n {
        let t = i as f64 / fs;
        events.push((t - tau, 1, i));
        events.push((t, 0, i));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let rate = 2.0 * PI * linewidth;
    let mut omega = 0.0;
    let mut prev = events[0].0;
    let mut xi = vec![0.0; n];
    for &(t, tag, i) in &events {
        let dt = t - prev;
        if dt > 0.0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            omega += (rate * dt).sqrt() * z;
        }
        prev = t;
        if tag == 0 {
            xi[i] += omega;
        } else {
            xi[i] -= omega;
        }
    }
    Ok(xi)
}

/// Which noise sources [`synth_measurement_with`] draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseSwitches {
    pub phase_noise: bool,
    pub shot_noise: bool,
}

impl NoiseSwitches {
    pub const ALL: Self = Self { phase_noise: true, shot_noise: true };
    pub const NONE: Self = Self { phase_noise: false, shot_noise: false };
}

impl Default for NoiseSwitches {
    fn default() -> Self {
        Self::ALL
    }
}

/// Sampled interference signal and sum channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub u: Vec<Complex64>,
    pub v_aux: Vec<Complex64>,
    pub config: AcquisitionConfig,
    pub seed: u64,
}

impl Measurement {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.config.sampling_rate
    }

    pub fn sample_time(&self, n: usize) -> f64 {
        n as f64 / self.config.sampling_rate
    }
}

/// Noise-free u(t_n)/A₁ = exp(jφ(t_n)).
pub fn noiseless_phasor(w: &ModulationWaveform, fs: f64, n: usize, tau: f64, f: f64) -> Vec<Complex64> {
    (0..n)
        .map(|i| {
            let cyc = w.interference_phase_cycles(tau, f, i as f64 / fs);
            Complex64::from_polar(1.0, 2.0 * PI * cyc)
        })
        .collect()
}

pub fn synth_measurement(w: &ModulationWaveform, cfg: &AcquisitionConfig, target: &Target, seed: u64) -> Result<Measurement> {
    synth_measurement_with(w, cfg, target, seed, NoiseSwitches::ALL)
}

pub fn synth_measurement_with(
    w: &ModulationWaveform,
    cfg: &AcquisitionConfig,
    target: &Target,
    seed: u64,
    noise: NoiseSwitches,
) -> Result<Measurement> {
    cfg.validate()?;
    if !target.velocity.is_finite() {
        return Err(invalid("velocity must be finite"));
    }
    let amp = Amplitudes::at(cfg, target.distance)?;
    let tau = target.delay();
    let f = target.doppler(w.center_frequency());
    let n = cfg.num_samples;
    let fs = cfg.sampling_rate;

    let xi = if noise.phase_noise {
        simulate_phase_noise(cfg.linewidth, tau, fs, n, derive_seed(seed, &[STREAM_PHASE_NOISE]))?
    } else {
        vec![0.0; n]
    };
    let mut u: Vec<Complex64> = noiseless_phasor(w, fs, n, tau, f)
        .into_iter()
        .zip(&xi)
        .map(|(p, &x)| p * Complex64::from_polar(amp.a1, x))
        .collect();
    let mut v_aux = vec![Complex64::new(amp.a2, 0.0); n];
    if noise.shot_noise {
        let sd = amp.noise_variance().sqrt();
        add_complex_noise(&mut u, sd, derive_seed(seed, &[STREAM_SHOT_U]));
        add_complex_noise(&mut v_aux, sd, derive_seed(seed, &[STREAM_SHOT_V]));
    }
    Ok(Measurement { u, v_aux, config: *cfg, seed })
}

fn add_complex_noise(x: &mut [Complex64], sd: f64, seed: u64) {
    let mut rng = rng_from_seed(seed);
    for v in x.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *v += Complex64::new(sd * re, sd * im);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lidar_equation_examples() {
        let cfg = AcquisitionConfig::default();
        let p1 = received_power(&cfg, 1.0).unwrap();
        assert!((p1 - 1e-3 * 1e-6 * 0.01 / PI).abs() < 1e-24);
        assert!((p1 / 3.183e-12 - 1.0).abs() < 1e-3);
        let p10 = received_power(&cfg, 10.0).unwrap();
        assert!((p10 * 100.0 - p1).abs() < 1e-25);
        let dark = AcquisitionConfig { reflectivity: 0.0, ..cfg };
        assert_eq!(received_power(&dark, 5.0).unwrap(), 0.0);
        assert!(received_power(&cfg, 0.0).is_err());
        assert!(received_power(&cfg, -1.0).is_err());
    }

    #[test]
    fn snr_closed_form() {
        let cfg = AcquisitionConfig::default();
        let d = 50.0;
        let p_rx = received_power(&cfg, d).unwrap();
        let want = 2.0 * cfg.responsivity * cfg.lo_power * p_rx / (ELECTRON_CHARGE * (cfg.lo_power + p_rx));
        assert!((snr_eta(&cfg, d).unwrap() / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_noise_zero_linewidth() {
        assert!(simulate_phase_noise(0.0, 1e-6, 2e8, 100, 1).unwrap().iter().all(|&x| x == 0.0));
        assert!(simulate_phase_noise(1e5, 0.0, 2e8, 100, 1).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn phase_noise_variance_and_autocovariance() {
        let (l, tau, fs, n) = (1e5, 1e-6, 2e8, 1_000_000);
        let xi = simulate_phase_noise(l, tau, fs, n, 11).unwrap();
        let mean = xi.iter().sum::<f64>() / n as f64;
        let var = xi.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let want = 2.0 * PI * l * tau;
        assert!((var / want - 1.0).abs() < 0.05, "var {var} vs {want}");
        let lag = (tau / 2.0 * fs).round() as usize;
        let cov = (0..n - lag).map(|i| (xi[i] - mean) * (xi[i + lag] - mean)).sum::<f64>() / (n - lag) as f64;
        let want_cov = PI * l * tau;
        assert!((cov / want_cov - 1.0).abs() < 0.07, "cov {cov} vs {want_cov}");
    }

    #[test]
    fn noiseless_static_target_at_zero_delay_is_constant() {
        let w = ModulationWaveform::triangular(500e6, 2e-6, DEFAULT_CENTER_FREQUENCY).unwrap();
        let cfg = AcquisitionConfig::default();
        let amp = Amplitudes::at(&cfg, 1.0).unwrap();
        let p = noiseless_phasor(&w, cfg.sampling_rate, 50, 0.0, 0.0);
        for v in p {
            assert!((v * amp.a1 - Complex64::new(amp.a1, 0.0)).norm() < 1e-12 * amp.a1);
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let w = ModulationWaveform::sinusoidal(500e6, 2e-6, DEFAULT_CENTER_FREQUENCY).unwrap();
        let cfg = AcquisitionConfig::default();
        let t = Target::new(100.0, 3.0);
        let a = synth_measurement(&w, &cfg, &t, 5).unwrap();
        let b = synth_measurement(&w, &cfg, &t, 5).unwrap();
        let c = synth_measurement(&w, &cfg, &t, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.u, c.u);
        assert!(synth_measurement(&w, &cfg, &Target::new(-1.0, 0.0), 5).is_err());
    }

    #[test]
    fn power_budget_and_aux_level() {
        let w = ModulationWaveform::triangular(500e6, 2e-6, DEFAULT_CENTER_FREQUENCY).unwrap();
        let cfg = AcquisitionConfig { num_samples: 1_000_000, ..Default::default() };
        let d = 30.0;
        let m = synth_measurement(&w, &cfg, &Target::new(d, 0.0), 9).unwrap();
        let amp = Amplitudes::at(&cfg, d).unwrap();
        let power = m.u.iter().map(|v| v.norm_sqr()).sum::<f64>() / m.len() as f64;
        let want = amp.a1 * amp.a1 + 2.0 * amp.noise_variance();
        assert!((power / want - 1.0).abs() < 0.02);
        let mean_v = m.v_aux.iter().map(|v| v.re).sum::<f64>() / m.len() as f64;
        assert!((mean_v / amp.a2 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn unit_conversions_round_trip() {
        let t = Target::new(123.0, -7.5);
        assert!((delay_to_distance(t.delay()) - 123.0).abs() < 1e-12);
        let fc = DEFAULT_CENTER_FREQUENCY;
        assert!((doppler_to_velocity(t.doppler(fc), fc) + 7.5).abs() < 1e-12);
        assert!((velocity_to_doppler(-7.5, fc) - t.doppler(fc)).abs() < 1e-6);
    }

    #[test]
    fn window_warning_for_partial_period() {
        let w = ModulationWaveform::triangular(500e6, 2e-6, 0.0).unwrap();
        assert!(AcquisitionConfig::default().window_warning(&w).is_none());
        let cfg = AcquisitionConfig { num_samples: 900, ..Default::default() };
        assert!(cfg.window_warning(&w).is_some());
    }
}
