//! Frequency modulation waveforms a(t).
//!
//! All evaluation happens on the baseband deviation `a(t) - f_c`, which is
//! `2T`-periodic. Phase integrals are in cycles unless stated otherwise.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::numerics::{wrap, wrap_unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WaveformKind {
    Triangular,
    Sinusoidal,
    SmoothStair,
    Tabulated,
}

impl WaveformKind {
    pub fn name(self) -> &'static str {
        match self {
            WaveformKind::Triangular => "triangular",
            WaveformKind::Sinusoidal => "sinusoidal",
            WaveformKind::SmoothStair => "smooth-stair",
            WaveformKind::Tabulated => "tabulated",
        }
    }
}

impl std::str::FromStr for WaveformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "triangular" | "triangle" => Ok(WaveformKind::Triangular),
            "sinusoidal" | "sine" => Ok(WaveformKind::Sinusoidal),
            "smooth-stair" | "smoothstair" => Ok(WaveformKind::SmoothStair),
            "tabulated" | "table" => Ok(WaveformKind::Tabulated),
            other => Err(invalid(format!("unknown waveform kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for WaveformKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Sampled deviation `a(t) - f_c` with linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformTable {
    t: Vec<f64>,
    a: Vec<f64>,
    /// Running integral of the interpolant, cycles.
    cum: Vec<f64>,
}

impl WaveformTable {
    /// `t` must be strictly increasing; it is checked against the period
    /// when the waveform is built.
    pub fn new(t: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        if t.len() != a.len() || t.len() < 2 {
            return Err(invalid("waveform table needs at least two (t, a) rows of equal length"));
        }
        if t.iter().chain(&a).any(|v| !v.is_finite()) {
            return Err(invalid("waveform table contains non-finite values"));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("waveform table times must be strictly increasing"));
        }
        let mut cum = vec![0.0; t.len()];
        for i in 1..t.len() {
            cum[i] = cum[i - 1] + 0.5 * (a[i] + a[i - 1]) * (t[i] - t[i - 1]);
        }
        // shift so that the running integral is zero at t = 0
        let offset = Self::integral_at(&t, &a, &cum, 0.0);
        cum.iter_mut().for_each(|c| *c -= offset);
        Ok(Self { t, a, cum })
    }

    /// Parses `t_seconds,a_hz` CSV text (header required).
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (hline, header) = lines.next().ok_or(Error::TableFormat { line: 1, message: "empty file".into() })?;
        let cols: Vec<_> = header.split(',').map(|s| s.trim()).collect();
        if cols != ["t_seconds", "a_hz"] {
            return Err(Error::TableFormat {
                line: hline + 1,
                message: format!("expected header 't_seconds,a_hz', found '{}'", header.trim()),
            });
        }
        let (mut t, mut a) = (Vec::new(), Vec::new());
        for (i, line) in lines {
            let mut it = line.split(',').map(|s| s.trim());
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|s| s.parse::<f64>().ok())
                    .ok_or(Error::TableFormat { line: i + 1, message: format!("cannot parse '{}'", line.trim()) })
            };
            t.push(parse(it.next())?);
            a.push(parse(it.next())?);
            if it.next().is_some() {
                return Err(Error::TableFormat { line: i + 1, message: "expected two columns".into() });
            }
        }
        Self::new(t, a).map_err(|e| Error::TableFormat { line: 0, message: e.to_string() })
    }

    fn segment(t: &[f64], x: f64) -> usize {
        t.partition_point(|&v| v <= x).clamp(1, t.len() - 1) - 1
    }

    fn integral_at(t: &[f64], a: &[f64], cum: &[f64], x: f64) -> f64 {
        let i = Self::segment(t, x);
        let dt = x - t[i];
        let slope = (a[i + 1] - a[i]) / (t[i + 1] - t[i]);
        cum[i] + a[i] * dt + 0.5 * slope * dt * dt
    }

    fn value(&self, x: f64) -> f64 {
        let i = Self::segment(&self.t, x);
        let slope = (self.a[i + 1] - self.a[i]) / (self.t[i + 1] - self.t[i]);
        self.a[i] + slope * (x - self.t[i])
    }

    fn slope(&self, x: f64) -> f64 {
        let i = Self::segment(&self.t, x);
        (self.a[i + 1] - self.a[i]) / (self.t[i + 1] - self.t[i])
    }

    fn integral(&self, x: f64) -> f64 {
        Self::integral_at(&self.t, &self.a, &self.cum, x)
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.a
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct StairConsts {
    t0: f64,
    c1: f64,
    c2: f64,
    c3: f64,
    /// Integral over each of the five branches up to its start.
    start: [f64; 5],
}

/// A `2T`-periodic modulation function with bandwidth `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationWaveform {
    kind: WaveformKind,
    bandwidth: f64,
    chirp_duration: f64,
    center_frequency: f64,
    stair: Option<StairConsts>,
    table: Option<Arc<WaveformTable>>,
    period_integral: f64,
}

impl ModulationWaveform {
    fn checked(kind: WaveformKind, bandwidth: f64, chirp_duration: f64, center_frequency: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if !(chirp_duration > 0.0 && chirp_duration.is_finite()) {
            return Err(invalid(format!("chirp duration must be positive, got {chirp_duration}")));
        }
        if !center_frequency.is_finite() {
            return Err(invalid("center frequency must be finite"));
        }
        Ok(Self {
            kind,
            bandwidth,
            chirp_duration,
            center_frequency,
            stair: None,
            table: None,
            period_integral: 0.0,
        })
    }

    pub fn triangular(bandwidth: f64, chirp_duration: f64, center_frequency: f64) -> Result<Self> {
        Self::checked(WaveformKind::Triangular, bandwidth, chirp_duration, center_frequency)
    }

    pub fn sinusoidal(bandwidth: f64, chirp_duration: f64, center_frequency: f64) -> Result<Self> {
        Self::checked(WaveformKind::Sinusoidal, bandwidth, chirp_duration, center_frequency)
    }

    /// Quadratic ramps joined to a linear chirp with a superimposed sine.
    /// The deviation spans `[0, B]`.
    pub fn smooth_stair(bandwidth: f64, chirp_duration: f64, center_frequency: f64) -> Result<Self> {
        let mut w = Self::checked(WaveformKind::SmoothStair, bandwidth, chirp_duration, center_frequency)?;
        let (b, t) = (bandwidth, chirp_duration);
        let mut k = StairConsts {
            t0: t / 10.0,
            c1: 13.68 * b / (t * t),
            c2: -0.069 * b,
            c3: 30.0 / t,
            start: [0.0; 5],
        };
        let edges = [0.0, k.t0, t - k.t0, t + k.t0, 2.0 * t - k.t0, 2.0 * t];
        for i in 1..5 {
            k.start[i] = k.start[i - 1] + stair_antiderivative(&k, b, t, i - 1, edges[i])
                - stair_antiderivative(&k, b, t, i - 1, edges[i - 1]);
        }
        w.period_integral =
            k.start[4] + stair_antiderivative(&k, b, t, 4, edges[5]) - stair_antiderivative(&k, b, t, 4, edges[4]);
        w.stair = Some(k);
        Ok(w)
    }

    /// Linear interpolation of a sampled deviation. The table must cover
    /// `[0, 2T]` with a step of at most `1/(4B)`.
    pub fn tabulated(table: WaveformTable, bandwidth: f64, chirp_duration: f64, center_frequency: f64) -> Result<Self> {
        let mut w = Self::checked(WaveformKind::Tabulated, bandwidth, chirp_duration, center_frequency)?;
        let period = 2.0 * chirp_duration;
        let (t0, t1) = (table.t[0], table.t[table.t.len() - 1]);
        let slack = 1e-9 * period;
        if t0 > slack || t1 < period - slack {
            return Err(invalid(format!("waveform table covers [{t0}, {t1}] s but must cover [0, {period}] s")));
        }
        let max_step = table.t.windows(2).fold(0.0f64, |m, w| m.max(w[1] - w[0]));
        if max_step > 0.25 / bandwidth * (1.0 + 1e-9) {
            return Err(invalid(format!(
                "waveform table step {max_step:e} s exceeds 1/(4B) = {:e} s",
                0.25 / bandwidth
            )));
        }
        w.period_integral = table.integral(period);
        w.table = Some(Arc::new(table));
        Ok(w)
    }

    pub fn kind(&self) -> WaveformKind {
        self.kind
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn chirp_duration(&self) -> f64 {
        self.chirp_duration
    }

    pub fn period(&self) -> f64 {
        2.0 * self.chirp_duration
    }

    pub fn center_frequency(&self) -> f64 {
        self.center_frequency
    }

    pub fn table(&self) -> Option<&WaveformTable> {
        self.table.as_deref()
    }

    #[inline]
    fn reduce(&self, t: f64) -> f64 {
        let p = self.period();
        let r = t.rem_euclid(p);
        if r >= p {
            0.0
        } else {
            r
        }
    }

    /// a(t), Hz.
    pub fn eval(&self, t: f64) -> f64 {
        self.center_frequency + self.deviation(t)
    }

    /// a(t) - f_c, Hz.
    pub fn deviation(&self, t: f64) -> f64 {
        let s = self.reduce(t);
        let (b, tc) = (self.bandwidth, self.chirp_duration);
        match self.kind {
            WaveformKind::Triangular => {
                if s < tc {
                    b / tc * (s - 0.5 * tc)
                } else {
                    -b / tc * (s - 1.5 * tc)
                }
            }
            WaveformKind::Sinusoidal => -0.5 * b * (PI * s / tc).cos(),
            WaveformKind::SmoothStair => {
                let k = self.stair.as_ref().expect("smooth stair constants");
                let i = stair_branch(k, tc, s);
                stair_value(k, b, tc, i, s)
            }
            WaveformKind::Tabulated => self.table.as_ref().expect("table").value(s),
        }
    }

    /// da/dt, Hz/s. At corners the right-sided derivative is returned.
    pub fn slope(&self, t: f64) -> f64 {
        let s = self.reduce(t);
        let (b, tc) = (self.bandwidth, self.chirp_duration);
        match self.kind {
            WaveformKind::Triangular => {
                if s < tc {
                    b / tc
                } else {
                    -b / tc
                }
            }
            WaveformKind::Sinusoidal => 0.5 * b * PI / tc * (PI * s / tc).sin(),
            WaveformKind::SmoothStair => {
                let k = self.stair.as_ref().expect("smooth stair constants");
                let i = stair_branch(k, tc, s);
                stair_slope(k, b, tc, i, s)
            }
            WaveformKind::Tabulated => self.table.as_ref().expect("table").slope(s),
        }
    }

    /// Integral of the deviation over one period, cycles.
    pub fn period_integral(&self) -> f64 {
        self.period_integral
    }

    /// Mean deviation over a period, Hz.
    pub fn mean_deviation(&self) -> f64 {
        self.period_integral / self.period()
    }

    /// ∫₀ˢ (a - f_c) for `s` in `[0, 2T)`, cycles.
    fn integral_reduced(&self, s: f64) -> f64 {
        let (b, tc) = (self.bandwidth, self.chirp_duration);
        match self.kind {
            WaveformKind::Triangular => {
                let k = b / tc;
                if s < tc {
                    k * (0.5 * s * s - 0.5 * tc * s)
                } else {
                    let prim = |x: f64| -k * (0.5 * x * x - 1.5 * tc * x);
                    prim(s) - prim(tc)
                }
            }
            WaveformKind::Sinusoidal => -0.5 * b * tc / PI * (PI * s / tc).sin(),
            WaveformKind::SmoothStair => {
                let k = self.stair.as_ref().expect("smooth stair constants");
                let i = stair_branch(k, tc, s);
                let edge = stair_edges(k, tc)[i];
                k.start[i] + stair_antiderivative(k, b, tc, i, s) - stair_antiderivative(k, b, tc, i, edge)
            }
            WaveformKind::Tabulated => self.table.as_ref().expect("table").integral(s),
        }
    }

    /// ∫₀ᵗ (a - f_c), cycles, for any real `t`.
    pub fn baseband_phase(&self, t: f64) -> f64 {
        let p = self.period();
        let k = (t / p).floor();
        k * self.period_integral + self.integral_reduced(self.reduce(t))
    }

    /// Periodic part ψ(t) = ∫₀ᵗ (a - f_c) - ā t, cycles.
    pub fn periodic_phase(&self, t: f64) -> f64 {
        let s = self.reduce(t);
        self.integral_reduced(s) - self.mean_deviation() * s
    }

    /// Transmitted phase 2π∫₀ᵗ a(s) ds, radians.
    pub fn transmitted_phase(&self, t: f64) -> f64 {
        2.0 * PI * (self.center_frequency * t + self.baseband_phase(t))
    }

    /// Interference phase φ(t) = φ₀(t) − φ₀(t−τ) + 2πft reduced to cycles
    /// in `(-1/2, 1/2]`.
    ///
    /// Large terms are reduced before they are combined so the result stays
    /// accurate at optical carrier frequencies.
    pub fn interference_phase_cycles(&self, tau: f64, f: f64, t: f64) -> f64 {
        let carrier = wrap_unit((self.center_frequency * tau).fract());
        let mean = wrap_unit((self.mean_deviation() * tau).fract());
        let doppler = wrap_unit((f * t).fract());
        wrap_unit(self.periodic_phase(t) - self.periodic_phase(t - tau) + mean + carrier + doppler)
    }

    /// g(t) = a(t) − a(t − τ) + f, Hz.
    pub fn instantaneous_frequency(&self, tau: f64, f: f64, t: f64) -> f64 {
        self.deviation(t) - self.deviation(t - tau) + f
    }

    /// Normalized wrapped IF (1/f_s)·Ω_{f_s}[a(t) − a(t−τ) + f], in
    /// `(-1/2, 1/2]`.
    pub fn wrapped_if(&self, tau: f64, f: f64, fs: f64, t: f64) -> f64 {
        wrap(self.instantaneous_frequency(tau, f, t), fs) / fs
    }

    /// Smallest and largest deviation on a dense grid, Hz.
    pub fn deviation_range(&self) -> (f64, f64) {
        let n = 20_000;
        (0..=n).map(|i| self.deviation(self.period() * i as f64 / n as f64)).fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }
}

fn stair_edges(k: &StairConsts, tc: f64) -> [f64; 5] {
    [0.0, k.t0, tc - k.t0, tc + k.t0, 2.0 * tc - k.t0]
}

fn stair_branch(k: &StairConsts, tc: f64, s: f64) -> usize {
    let e = stair_edges(k, tc);
    (1..5).rev().find(|&i| s >= e[i]).unwrap_or(0)
}

fn stair_value(k: &StairConsts, b: f64, tc: f64, i: usize, s: f64) -> f64 {
    match i {
        0 => k.c1 * s * s,
        1 => b / tc * s - k.c2 * (k.c3 * (s - 0.5 * tc)).sin(),
        2 => b - k.c1 * (s - tc) * (s - tc),
        3 => b / tc * (2.0 * tc - s) - k.c2 * (k.c3 * (1.5 * tc - s)).sin(),
        _ => k.c1 * (s - 2.0 * tc) * (s - 2.0 * tc),
    }
}

fn stair_slope(k: &StairConsts, b: f64, tc: f64, i: usize, s: f64) -> f64 {
    match i {
        0 => 2.0 * k.c1 * s,
        1 => b / tc - k.c2 * k.c3 * (k.c3 * (s - 0.5 * tc)).cos(),
        2 => -2.0 * k.c1 * (s - tc),
        3 => -b / tc + k.c2 * k.c3 * (k.c3 * (1.5 * tc - s)).cos(),
        _ => 2.0 * k.c1 * (s - 2.0 * tc),
    }
}

fn stair_antiderivative(k: &StairConsts, b: f64, tc: f64, i: usize, s: f64) -> f64 {
    match i {
        0 => k.c1 * s * s * s / 3.0,
        1 => 0.5 * b / tc * s * s + k.c2 / k.c3 * (k.c3 * (s - 0.5 * tc)).cos(),
        2 => b * s - k.c1 * (s - tc).powi(3) / 3.0,
        3 => b / tc * (2.0 * tc * s - 0.5 * s * s) - k.c2 / k.c3 * (k.c3 * (1.5 * tc - s)).cos(),
        _ => k.c1 * (s - 2.0 * tc).powi(3) / 3.0,
    }
}
