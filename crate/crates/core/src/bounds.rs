//! Performance bounds for delay estimation from the extracted IF: noise
//! covariance, CRB, misspecified CRB and its mean over the unambiguous
//! range, plus the AWGN bounds for an ideal triangular CBF signal.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix4};

use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::iff::{midpoint_times, ShotNoiseCurve};
use crate::signal::{distance_to_delay, snr_eta, AcquisitionConfig};
use crate::waveform::ModulationWaveform;
use crate::SPEED_OF_LIGHT;

/// Largest IF length handled by the dense CRB factorization.
pub const DENSE_LIMIT: usize = 4096;
/// Default number of midpoint nodes for [`mmcrb`].
pub const MMCRB_NODES: usize = 512;
/// Relative change at which [`mmcrb`] stops doubling the node count.
pub const MMCRB_REL_TOL: f64 = 5e-3;

/// Σ_d for N−1 IF samples: Wiener phase-noise bands plus shot noise on the
/// diagonal and first off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec {
    pub size: usize,
    pub sampling_rate: f64,
    pub linewidth: f64,
    pub tau: f64,
    /// Shot-noise variance p.
    pub p: f64,
    /// Shot-noise lag-one covariance.
    pub q_cov: f64,
}

/// Second difference 2m(h) − m(h+1) − m(h−1) of m(u) = max(x − |u|, 0),
/// evaluated piecewise so that zero bands come out exactly zero.
fn lag_kernel(h: usize, x: f64) -> f64 {
    let hf = h as f64;
    if h == 0 {
        return 2.0 * x.clamp(0.0, 1.0);
    }
    if x <= hf - 1.0 || x >= hf + 1.0 {
        0.0
    } else if x <= hf {
        -(x - (hf - 1.0))
    } else {
        x - hf - 1.0
    }
}

/// d/dx of [`lag_kernel`].
fn lag_kernel_dx(h: usize, x: f64) -> f64 {
    let hf = h as f64;
    if h == 0 {
        return if x < 1.0 { 2.0 } else { 0.0 };
    }
    if x <= hf - 1.0 || x >= hf + 1.0 {
        0.0
    } else if x <= hf {
        -1.0
    } else {
        1.0
    }
}

impl CovarianceSpec {
    /// Phase-noise covariance of χ at lag `h`.
    pub fn phase_cov(&self, h: usize) -> f64 {
        let dt = 1.0 / self.sampling_rate;
        self.linewidth * dt / (2.0 * PI) * lag_kernel(h, self.tau / dt)
    }

    /// ∂/∂τ of [`phase_cov`](Self::phase_cov).
    pub fn phase_cov_dtau(&self, h: usize) -> f64 {
        self.linewidth / (2.0 * PI) * lag_kernel_dx(h, self.tau * self.sampling_rate)
    }

    /// Lag ⌊τ f_s⌋ of the first far band.
    pub fn far_lag(&self) -> usize {
        (self.tau * self.sampling_rate).floor() as usize
    }

    /// Nonzero bands (lag, value), lag 0 first.
    pub fn bands(&self) -> Vec<(usize, f64)> {
        let lags = self.far_lag() + 2;
        (0..=lags.min(self.size.saturating_sub(1)))
            .map(|h| {
                let mut v = self.phase_cov(h);
                if h == 0 {
                    v += self.p;
                } else if h == 1 {
                    v += self.q_cov;
                }
                (h, v)
            })
            .filter(|&(h, v)| v != 0.0 || h == 0)
            .collect()
    }

    /// Bands of ∂Σ/∂d. The shot-noise terms are held fixed.
    pub fn derivative_bands(&self) -> Vec<(usize, f64)> {
        let dtau_dd = 2.0 / SPEED_OF_LIGHT;
        let lags = self.far_lag() + 2;
        (0..=lags.min(self.size.saturating_sub(1)))
            .map(|h| (h, self.phase_cov_dtau(h) * dtau_dd))
            .filter(|&(_, v)| v != 0.0)
            .collect()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let h = i.abs_diff(j);
        let mut v = self.phase_cov(h);
        if h == 0 {
            v += self.p;
        } else if h == 1 {
            v += self.q_cov;
        }
        v
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        banded_dense(self.size, &self.bands())
    }

    /// xᵀ Σ y using the bands only.
    pub fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        banded_quadratic(&self.bands(), x, y)
    }
}

fn banded_dense(n: usize, bands: &[(usize, f64)]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for &(h, v) in bands {
        for i in 0..n.saturating_sub(h) {
            m[(i, i + h)] = v;
            m[(i + h, i)] = v;
        }
    }
    m
}

fn banded_quadratic(bands: &[(usize, f64)], x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut total = 0.0;
    for &(h, v) in bands {
        if h >= n {
            continue;
        }
        let s: f64 = if h == 0 {
            x.iter().zip(y).map(|(a, b)| a * b).sum()
        } else {
            (0..n - h).map(|i| x[i] * y[i + h] + x[i + h] * y[i]).sum()
        };
        total += v * s;
    }
    total
}

/// Σ_d at distance `d` with shot-noise terms taken from `shot` at `snr`.
pub fn covariance_with_snr(d: f64, cfg: &AcquisitionConfig, snr: f64, shot: &ShotNoiseCurve) -> Result<CovarianceSpec> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(invalid(format!("distance must be positive, got {d}")));
    }
    cfg.validate()?;
    let (p, q_cov) = if snr.is_infinite() && snr > 0.0 { (0.0, 0.0) } else { shot.band(snr) };
    Ok(CovarianceSpec {
        size: cfg.num_samples - 1,
        sampling_rate: cfg.sampling_rate,
        linewidth: cfg.linewidth,
        tau: distance_to_delay(d),
        p,
        q_cov,
    })
}

/// Σ_d with SNR from the lidar power model.
pub fn covariance_matrix(d: f64, cfg: &AcquisitionConfig, shot: &ShotNoiseCurve) -> Result<CovarianceSpec> {
    covariance_with_snr(d, cfg, snr_eta(cfg, d)?, shot)
}

/// ∂g̃_d/∂d = (2/c)(1/f_s)·a′(t′_n − τ), cycles per metre.
pub fn delay_jacobian(w: &ModulationWaveform, cfg: &AcquisitionConfig, d: f64) -> Vec<f64> {
    let tau = distance_to_delay(d);
    let fs = cfg.sampling_rate;
    let scale = 2.0 / (SPEED_OF_LIGHT * fs);
    midpoint_times(cfg.num_samples, fs).into_iter().map(|t| scale * w.slope(t - tau)).collect()
}

fn norm2(j: &[f64]) -> f64 {
    j.iter().map(|v| v * v).sum()
}

fn sandwich(j: &[f64], cov: &CovarianceSpec) -> Result<f64> {
    let jj = norm2(j);
    if !(jj > 0.0) {
        return Err(Error::DegenerateInput("Jacobian vanishes; the modulation is flat over the window".into()));
    }
    Ok(cov.quadratic_form(j, j) / (jj * jj))
}

/// MCRB_d = JᵀΣJ/(JᵀJ)², m².
pub fn mcrb_delay(d: f64, w: &ModulationWaveform, cfg: &AcquisitionConfig, shot: &ShotNoiseCurve) -> Result<f64> {
    let cov = covariance_matrix(d, cfg, shot)?;
    sandwich(&delay_jacobian(w, cfg, d), &cov)
}

/// CRB_d = [JᵀΣ⁻¹J + ½tr(Σ′Σ⁻¹Σ′Σ⁻¹)]⁻¹, m².
pub fn crb_delay(d: f64, w: &ModulationWaveform, cfg: &AcquisitionConfig, shot: &ShotNoiseCurve) -> Result<f64> {
    let cov = covariance_matrix(d, cfg, shot)?;
    let j = delay_jacobian(w, cfg, d);
    fisher_information(&cov, &j).map(|i| 1.0 / i)
}

/// Gaussian Fisher information for d given Σ_d and the mean Jacobian.
pub fn fisher_information(cov: &CovarianceSpec, j: &[f64]) -> Result<f64> {
    let n = cov.size;
    if n > DENSE_LIMIT {
        return Err(Error::ResourceLimit(format!("CRB needs a dense {n}x{n} factorization; limit is {DENSE_LIMIT}")));
    }
    let sigma = cov.to_dense();
    let chol = match sigma.clone().cholesky() {
        Some(c) => c,
        None => {
            let eig = sigma.symmetric_eigenvalues();
            let (lo, hi) = eig.iter().fold((f64::MAX, 0f64), |(lo, hi), &v| (lo.min(v.abs()), hi.max(v.abs())));
            return Err(Error::IllConditioned { condition: if lo > 0.0 { hi / lo } else { f64::INFINITY } });
        }
    };
    let jv = DVector::from_column_slice(j);
    let mean_term = jv.dot(&chol.solve(&jv));
    let dsigma = banded_dense(n, &cov.derivative_bands());
    let a = chol.solve(&dsigma);
    let trace_term = 0.5 * (&a * &a).trace();
    let info = mean_term + trace_term;
    if !info.is_finite() || info <= 0.0 {
        return Err(Error::NumericFailure { message: "non-positive Fisher information".into(), last_point: vec![cov.tau] });
    }
    Ok(info)
}

/// Pairwise sum; fixed association order regardless of execution mode.
fn pairwise_sum(x: &[f64]) -> f64 {
    match x.len() {
        0 => 0.0,
        1 => x[0],
        n => pairwise_sum(&x[..n / 2]) + pairwise_sum(&x[n / 2..]),
    }
}

/// Midpoint rule for (1/cT)∫₀^{cT} MCRB_d dd with a fixed node count.
pub fn mmcrb_with_nodes(w: &ModulationWaveform, cfg: &AcquisitionConfig, shot: &ShotNoiseCurve, nodes: usize, exec: Exec) -> Result<f64> {
    if nodes < 32 {
        return Err(invalid("mmcrb needs at least 32 quadrature nodes"));
    }
    let range = SPEED_OF_LIGHT * w.chirp_duration();
    let h = range / nodes as f64;
    let vals = exec.map_range(nodes, |i| mcrb_delay((i as f64 + 0.5) * h, w, cfg, shot));
    let vals: Vec<f64> = vals.into_iter().collect::<Result<_>>()?;
    Ok(pairwise_sum(&vals) / nodes as f64)
}

/// Mean MCRB over (0, cT], doubling the node count from `nodes` until two
/// successive values agree to [`MMCRB_REL_TOL`].
pub fn mmcrb(w: &ModulationWaveform, cfg: &AcquisitionConfig, shot: &ShotNoiseCurve, nodes: usize, exec: Exec) -> Result<f64> {
    let mut n = nodes;
    let mut prev = mmcrb_with_nodes(w, cfg, shot, n, exec)?;
    for _ in 0..6 {
        n *= 2;
        let next = mmcrb_with_nodes(w, cfg, shot, n, exec)?;
        if (next - prev).abs() <= MMCRB_REL_TOL * next.abs() {
            return Ok(next);
        }
        prev = next;
    }
    Ok(prev)
}

/// One-product approximation of the mean MCRB: the Jacobian is frozen at
/// d = 0 and Σ_d is integrated over (0, cT] before the sandwich.
///
/// The phase bands integrate in closed form; p and q are integrated with a
/// midpoint rule on `nodes` points.
pub fn mmcrb_approx(w: &ModulationWaveform, cfg: &AcquisitionConfig, shot: &ShotNoiseCurve, nodes: usize) -> Result<f64> {
    cfg.validate()?;
    if nodes < 32 {
        return Err(invalid("mmcrb_approx needs at least 32 quadrature nodes"));
    }
    let t = w.chirp_duration();
    let range = SPEED_OF_LIGHT * t;
    let fs = cfg.sampling_rate;
    let dt = 1.0 / fs;
    let period = 2.0 * t;
    // ∫₀^{2T} max(τ − |u|, 0) dτ = (2T − |u|)²/2, differenced over lags
    let tau_integral = |u: f64| 0.5 * (period - u.abs()).max(0.0).powi(2);
    let dd_dtau = 0.5 * SPEED_OF_LIGHT;
    let difference_kernel = |h: usize| {
        let hf = h as f64;
        cfg.linewidth / (2.0 * PI) * (2.0 * tau_integral(hf * dt) - tau_integral((hf + 1.0) * dt) - tau_integral((hf - 1.0) * dt))
    };
    let size = cfg.num_samples - 1;
    let max_lag = ((period * fs).ceil() as usize + 1).min(size.saturating_sub(1));
    let mut bands: Vec<(usize, f64)> = (0..=max_lag).map(|h| (h, dd_dtau * difference_kernel(h))).collect();
    let h = range / nodes as f64;
    let mut ps = Vec::with_capacity(nodes);
    let mut qs = Vec::with_capacity(nodes);
    for i in 0..nodes {
        let (p, q) = shot.band(snr_eta(cfg, (i as f64 + 0.5) * h)?);
        ps.push(p);
        qs.push(q);
    }
    bands[0].1 += pairwise_sum(&ps) * h;
    if bands.len() > 1 {
        bands[1].1 += pairwise_sum(&qs) * h;
    }
    let j = delay_jacobian(w, cfg, 0.0);
    let jj = norm2(&j);
    if !(jj > 0.0) {
        return Err(Error::DegenerateInput("Jacobian vanishes; the modulation is flat over the window".into()));
    }
    Ok(banded_quadratic(&bands, &j, &j) / (jj * jj) / range)
}

/// Counts of off-diagonal Σ_d entries whose sign differs from (agrees
/// with) the Jacobian outer product.
pub fn sign_diagnostic(d: f64, w: &ModulationWaveform, cfg: &AcquisitionConfig, shot: &ShotNoiseCurve) -> Result<(usize, usize)> {
    let cov = covariance_matrix(d, cfg, shot)?;
    let j = delay_jacobian(w, cfg, d);
    let n = j.len();
    let (mut opposite, mut same) = (0, 0);
    for (h, v) in cov.bands() {
        if h == 0 || h >= n || v == 0.0 {
            continue;
        }
        for i in 0..n - h {
            let o = j[i] * j[i + h];
            if o == 0.0 {
                continue;
            }
            if (o > 0.0) == (v > 0.0) {
                same += 2;
            } else {
                opposite += 2;
            }
        }
    }
    Ok((opposite, same))
}

/// Fisher information of (α, b, f, τ) for an ideal two-segment triangular
/// CBF signal of 2N samples at t_n = n/f_s in complex AWGN with
/// per-quadrature variance σ².
pub fn fim_awgn_cbf(fs: f64, sigma2: f64, alpha: f64, chirp_rate: f64, n: usize) -> Matrix4<f64> {
    let nf = n as f64;
    let a2 = alpha * alpha;
    let g = chirp_rate;
    let s1 = nf * (2.0 * nf - 1.0);
    let s2 = nf * (2.0 * nf - 1.0) * (4.0 * nf - 1.0) / 3.0;
    let m = Matrix4::new(
        2.0 * nf,
        0.0,
        0.0,
        0.0,
        0.0,
        2.0 * a2 * nf,
        2.0 * PI * a2 * s1 / fs,
        -2.0 * PI * a2 * g * nf * nf / fs,
        0.0,
        2.0 * PI * a2 * s1 / fs,
        4.0 * PI * PI * a2 * s2 / (fs * fs),
        -4.0 * PI * PI * a2 * g * nf * nf * (2.0 * nf - 1.0) / (fs * fs),
        0.0,
        -2.0 * PI * a2 * g * nf * nf / fs,
        -4.0 * PI * PI * a2 * g * nf * nf * (2.0 * nf - 1.0) / (fs * fs),
        4.0 * PI * PI * a2 * g * g * s2 / (fs * fs),
    );
    m / sigma2
}

/// (var τ̂, var f̂) lower bounds from the inverse of [`fim_awgn_cbf`].
pub fn crb_awgn_cbf(fs: f64, sigma2: f64, alpha: f64, chirp_rate: f64, n: usize) -> Result<(f64, f64)> {
    if n < 3 {
        return Err(invalid("AWGN CBF bound needs N >= 3"));
    }
    if !(fs > 0.0 && sigma2 > 0.0 && alpha != 0.0 && chirp_rate != 0.0) {
        return Err(invalid("AWGN CBF bound needs positive f_s, σ² and nonzero α, chirp rate"));
    }
    // scale f and τ to O(1) columns before inverting
    let m = fim_awgn_cbf(fs, sigma2, alpha, chirp_rate, n);
    let d = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0 / alpha, 1.0, fs / n as f64, fs / (n as f64 * chirp_rate)));
    let scaled = d * m * d;
    let inv = scaled.try_inverse().ok_or(Error::IllConditioned { condition: f64::INFINITY })?;
    let full = d * inv * d;
    Ok((full[(3, 3)], full[(2, 2)]))
}

/// Closed forms for the inverse FIM entries of τ and f.
pub fn crb_awgn_cbf_closed_form(fs: f64, sigma2: f64, alpha: f64, chirp_rate: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let common = 4.0 * nf * PI * PI * alpha * alpha * (nf - 1.0) * (nf + 1.0) * (4.0 * nf - 1.0);
    let var_tau = sigma2 * 3.0 * fs * fs * (2.0 * nf + 1.0) / (common * chirp_rate * chirp_rate);
    let var_f = sigma2 * 3.0 * fs * fs * (13.0 * nf * nf - 12.0 * nf + 2.0) / (common * (2.0 * nf - 1.0));
    (var_tau, var_f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iff::{default_snr_grid, h_fit, HTable};
    use std::sync::OnceLock;

    fn shot() -> &'static ShotNoiseCurve {
        static CURVE: OnceLock<ShotNoiseCurve> = OnceLock::new();
        CURVE.get_or_init(|| h_fit(&default_snr_grid(), 10_000, 1, Exec::default()).unwrap())
    }

    fn flat_shot(p: f64) -> ShotNoiseCurve {
        let t = HTable::new(vec![-100.0, 200.0], vec![p, p], 0, 0).unwrap();
        ShotNoiseCurve { table: t, lag1_correlation: vec![0.0, 0.0] }
    }

    fn waves() -> [ModulationWaveform; 3] {
        let fc = crate::signal::DEFAULT_CENTER_FREQUENCY;
        [
            ModulationWaveform::triangular(500e6, 2e-6, fc).unwrap(),
            ModulationWaveform::sinusoidal(500e6, 2e-6, fc).unwrap(),
            ModulationWaveform::smooth_stair(500e6, 2e-6, fc).unwrap(),
        ]
    }

    #[test]
    fn far_band_example() {
        let cfg = AcquisitionConfig::default();
        let d = SPEED_OF_LIGHT * 0.5e-6 + 0.3 * SPEED_OF_LIGHT / (2.0 * cfg.sampling_rate);
        let cov = covariance_with_snr(d, &cfg, f64::INFINITY, shot()).unwrap();
        assert_eq!(cov.far_lag(), 200);
        let k = cov.far_lag();
        let (dt, l, tau) = (1.0 / cfg.sampling_rate, cfg.linewidth, cov.tau);
        let want_k = l / (2.0 * PI) * (tau - (k as f64 + 1.0) * dt);
        let want_k1 = l / (2.0 * PI) * (k as f64 * dt - tau);
        assert!((cov.phase_cov(k) - want_k).abs() < 1e-12 * want_k.abs());
        assert!((cov.phase_cov(k + 1) - want_k1).abs() < 1e-12 * want_k1.abs());
        assert!(want_k < 0.0 && want_k1 < 0.0);
        assert!((cov.phase_cov(k) + cov.phase_cov(k + 1) + l * dt / (2.0 * PI)).abs() < 1e-15);
        assert!((cov.phase_cov(0) - l / (PI * cfg.sampling_rate)).abs() < 1e-15);
        for h in [1, 2, 50, 199, 202, 300] {
            assert_eq!(cov.phase_cov(h), 0.0, "lag {h}");
        }
    }

    #[test]
    fn zero_noise_gives_zero_matrix() {
        let cfg = AcquisitionConfig { linewidth: 0.0, ..Default::default() };
        let cov = covariance_with_snr(100.0, &cfg, f64::INFINITY, shot()).unwrap();
        assert!(cov.to_dense().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn high_snr_adjacent_ratio() {
        let cfg = AcquisitionConfig::default();
        let cov = covariance_with_snr(100.0, &cfg, 1e3, shot()).unwrap();
        assert!((cov.q_cov / cov.p + 0.5).abs() < 0.05);
    }

    #[test]
    fn white_noise_reductions() {
        let cfg = AcquisitionConfig { linewidth: 0.0, ..Default::default() };
        let p = 3e-4;
        let s = flat_shot(p);
        for w in waves() {
            let d = 250.0;
            let j = delay_jacobian(&w, &cfg, d);
            let jj = norm2(&j);
            let white = p / jj;
            let m = mcrb_delay(d, &w, &cfg, &s).unwrap();
            let c = crb_delay(d, &w, &cfg, &s).unwrap();
            assert!((m / white - 1.0).abs() < 1e-12);
            assert!((c / white - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn crb_matches_finite_difference_fisher_information() {
        // E_{d0}[log N(x; μ(d), Σ(d))] differentiated twice numerically
        let cfg = AcquisitionConfig { num_samples: 51, ..Default::default() };
        let w = &waves()[1];
        let s = shot();
        let d0 = 37.3;
        let snr = snr_eta(&cfg, d0).unwrap();
        let times = midpoint_times(cfg.num_samples, cfg.sampling_rate);
        let mean = |d: f64| -> DVector<f64> {
            let tau = distance_to_delay(d);
            DVector::from_iterator(times.len(), times.iter().map(|&t| (w.deviation(t) - w.deviation(t - tau)) / cfg.sampling_rate))
        };
        let sigma = |d: f64| covariance_with_snr(d, &cfg, snr, s).unwrap().to_dense();
        let (mu0, s0) = (mean(d0), sigma(d0));
        let expected_ll = |d: f64| {
            let sd = sigma(d);
            let chol = sd.clone().cholesky().unwrap();
            let logdet: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
            let r = &mu0 - mean(d);
            let tr = chol.solve(&s0).trace();
            -0.5 * logdet - 0.5 * (tr + r.dot(&chol.solve(&r)))
        };
        let h = 1e-3;
        let info_fd = -(expected_ll(d0 + h) - 2.0 * expected_ll(d0) + expected_ll(d0 - h)) / (h * h);
        let cov = covariance_with_snr(d0, &cfg, snr, s).unwrap();
        let info = fisher_information(&cov, &delay_jacobian(w, &cfg, d0)).unwrap();
        assert!((info / info_fd - 1.0).abs() < 1e-4, "{info} vs {info_fd}");
    }

    #[test]
    fn crb_below_mcrb() {
        let cfg = AcquisitionConfig::default();
        for w in waves() {
            for i in 0..8 {
                let d = 7.3 + 73.1 * i as f64;
                let c = crb_delay(d, &w, &cfg, shot()).unwrap();
                let m = mcrb_delay(d, &w, &cfg, shot()).unwrap();
                assert!(c <= m * (1.0 + 1e-9), "{:?} {d}: {c} > {m}", w.kind());
            }
        }
    }

    #[test]
    fn singular_covariance_is_reported() {
        let cfg = AcquisitionConfig { linewidth: 0.0, ..Default::default() };
        let cov = covariance_with_snr(100.0, &cfg, f64::INFINITY, shot()).unwrap();
        let r = fisher_information(&cov, &delay_jacobian(&waves()[0], &cfg, 100.0));
        assert!(matches!(r, Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn opposite_signs_dominate_at_long_range() {
        let cfg = AcquisitionConfig::default();
        for w in waves() {
            for d in [330.0, 420.0, 510.0, 590.0] {
                let (opp, same) = sign_diagnostic(d, &w, &cfg, shot()).unwrap();
                assert!(opp > same, "{:?} {d}: {opp} vs {same}", w.kind());
            }
        }
    }

    #[test]
    fn five_consecutive_periods_beat_averaging() {
        let one = AcquisitionConfig { num_samples: 800, ..Default::default() };
        let five = AcquisitionConfig { num_samples: 4000, ..Default::default() };
        // the gain needs a′ positively correlated at lag τ, i.e. τ well past 3T/2
        for w in &waves()[..2] {
            for d in [520.0, 550.0, 580.0] {
                let m1 = mcrb_delay(d, w, &one, shot()).unwrap();
                let m5 = mcrb_delay(d, w, &five, shot()).unwrap();
                assert!(m5 < m1 / 5.0, "{:?} {d}: {m5} vs {}", w.kind(), m1 / 5.0);
            }
        }
    }

    #[test]
    fn approximation_tracks_exact_mean() {
        let cfg = AcquisitionConfig::default();
        let mut roots = Vec::new();
        for w in waves() {
            let exact = mmcrb(&w, &cfg, shot(), MMCRB_NODES, Exec::default()).unwrap();
            let approx = mmcrb_approx(&w, &cfg, shot(), 4096).unwrap();
            assert!((approx / exact - 1.0).abs() < 0.01, "{:?}: {exact} vs {approx}", w.kind());
            roots.push(exact.sqrt());
        }
        assert!(roots[2] < roots[1] && roots[1] < roots[0]);
    }

    #[test]
    fn mmcrb_exec_modes_agree() {
        let cfg = AcquisitionConfig::default();
        let w = &waves()[0];
        let a = mmcrb_with_nodes(w, &cfg, shot(), 64, Exec::Sequential).unwrap();
        let b = mmcrb_with_nodes(w, &cfg, shot(), 64, Exec::default()).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(mmcrb_with_nodes(w, &cfg, shot(), 8, Exec::Sequential).is_err());
    }

    #[test]
    fn awgn_inverse_matches_closed_form() {
        for n in [10, 100, 1000] {
            let (fs, s2, a, g) = (200e6, 0.7, 1.3, 500e6 / 2e-6);
            let (vt, vf) = crb_awgn_cbf(fs, s2, a, g, n).unwrap();
            let (ct, cf) = crb_awgn_cbf_closed_form(fs, s2, a, g, n);
            assert!((vt / ct - 1.0).abs() < 1e-9, "{n}: {vt} vs {ct}");
            assert!((vf / cf - 1.0).abs() < 1e-9, "{n}: {vf} vs {cf}");
        }
        assert!(crb_awgn_cbf(200e6, 1.0, 1.0, 1e14, 2).is_err());
    }

    #[test]
    fn awgn_fim_matches_direct_sum() {
        // [J]_ij = (1/σ²) Re Σ conj(∂s/∂θ_i) ∂s/∂θ_j
        let (fs, s2, a, g, n) = (50e6, 0.3, 0.8, 2e14, 40);
        let (f, tau, b) = (1.1e6, 0.4e-6, 0.2);
        let mut direct = Matrix4::<f64>::zeros();
        for k in 0..2 * n {
            let t = k as f64 / fs;
            let sign = if k < n { 1.0 } else { -1.0 };
            let s = num_complex::Complex64::from_polar(a, 2.0 * PI * (sign * g * tau + f) * t + b);
            let j = num_complex::Complex64::i();
            let ds = [s / a, j * s, j * 2.0 * PI * t * s, j * 2.0 * PI * sign * g * t * s];
            for r in 0..4 {
                for c in 0..4 {
                    direct[(r, c)] += (ds[r].conj() * ds[c]).re / s2;
                }
            }
        }
        let m = fim_awgn_cbf(fs, s2, a, g, n);
        for r in 0..4 {
            for c in 0..4 {
                let scale = (direct[(r, r)] * direct[(c, c)]).sqrt();
                assert!((m[(r, c)] - direct[(r, c)]).abs() < 1e-10 * scale, "({r},{c})");
            }
        }
    }
}
