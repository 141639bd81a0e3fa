//! Wrapped-normal log-likelihood of the IF sequence and the deterministic
//! landscape distance.

use crate::error::{invalid, Result};
use crate::numerics::wrap_unit;
use crate::waveform::ModulationWaveform;

use super::extract::IfSequence;

/// IF sequence paired with its waveform, with a(t′_n) cached.
#[derive(Debug, Clone)]
pub struct IffProblem<'a> {
    waveform: &'a ModulationWaveform,
    zeta: &'a [f64],
    times: &'a [f64],
    fs: f64,
    dev_at_t: Vec<f64>,
}

impl<'a> IffProblem<'a> {
    pub fn new(z: &'a IfSequence, waveform: &'a ModulationWaveform) -> Self {
        let dev_at_t = z.times.iter().map(|&t| waveform.deviation(t)).collect();
        Self { waveform, zeta: &z.zeta, times: &z.times, fs: z.sampling_rate, dev_at_t }
    }

    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }

    pub fn sampling_rate(&self) -> f64 {
        self.fs
    }

    pub fn waveform(&self) -> &ModulationWaveform {
        self.waveform
    }

    /// Unwrapped normalized IF (a(t′_n) − a(t′_n − τ) + f)/f_s.
    #[inline]
    fn model(&self, n: usize, tau: f64, f: f64) -> f64 {
        (self.dev_at_t[n] - self.waveform.deviation(self.times[n] - tau) + f) / self.fs
    }

    /// Wrapped residuals Ω₁(ζ_n − g̃(t′_n)).
    pub fn residuals(&self, tau: f64, f: f64) -> Vec<f64> {
        (0..self.len()).map(|n| wrap_unit(self.zeta[n] - self.model(n, tau, f))).collect()
    }

    /// L_IFF and its gradient (∂/∂τ, ∂/∂f).
    pub fn loglik(&self, tau: f64, f: f64, sigma2: f64, k: usize) -> (f64, [f64; 2]) {
        let inv = 1.0 / sigma2;
        let mut value = 0.0;
        let (mut g_tau, mut g_f) = (0.0, 0.0);
        for n in 0..self.len() {
            let r = wrap_unit(self.zeta[n] - self.model(n, tau, f));
            // anchored at k = 0, which dominates because |r| ≤ 1/2
            let (mut sum, mut moment) = (1.0, r);
            for kk in 1..=k as i64 {
                let kf = kk as f64;
                let plus = (-(kf * kf - 2.0 * r * kf) * 0.5 * inv).exp();
                let minus = (-(kf * kf + 2.0 * r * kf) * 0.5 * inv).exp();
                sum += plus + minus;
                moment += plus * (r - kf) + minus * (r + kf);
            }
            value += -0.5 * r * r * inv + sum.ln();
            let d = moment / sum * inv;
            g_tau += d * self.waveform.slope(self.times[n] - tau) / self.fs;
            g_f += d / self.fs;
        }
        (value, [g_tau, g_f])
    }

    /// L_IFF only.
    pub fn value(&self, tau: f64, f: f64, sigma2: f64, k: usize) -> f64 {
        self.loglik(tau, f, sigma2, k).0
    }
}

/// Checked entry point for a single evaluation of L_IFF.
pub fn wrapped_normal_loglik(
    z: &IfSequence,
    w: &ModulationWaveform,
    tau: f64,
    f: f64,
    sigma2: f64,
    k: usize,
) -> Result<(f64, [f64; 2])> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(invalid(format!("sigma2 must be positive, got {sigma2}")));
    }
    if k < 1 {
        return Err(invalid("K must be at least 1"));
    }
    Ok(IffProblem::new(z, w).loglik(tau, f, sigma2, k))
}

/// D = Σ_n Ω₁(g̃_{τ1,f1}(t′_n) − g̃_{τ2,f2}(t′_n))².
pub fn deterministic_distance(w: &ModulationWaveform, tau1: f64, f1: f64, tau2: f64, f2: f64, fs: f64, times: &[f64]) -> f64 {
    times
        .iter()
        .map(|&t| {
            let d = (w.deviation(t - tau2) - w.deviation(t - tau1) + f1 - f2) / fs;
            wrap_unit(d).powi(2)
        })
        .sum()
}
