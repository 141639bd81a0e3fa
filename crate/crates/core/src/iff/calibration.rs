//! Noise calibration: SNR estimation from the sum channel and the
//! Monte Carlo curve ĥ(SNR) for the variance of shot-noise induced IF errors.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::numerics::wrap;
use crate::rng::{derive_seed, rng_from_seed};

/// Variance of a uniform variable on an interval of unit length.
pub const UNIFORM_VARIANCE: f64 = 1.0 / 12.0;

/// (mean|u|² − var v) / var v.
pub fn estimate_snr(u: &[Complex64], v_aux: &[Complex64]) -> Result<f64> {
    if u.len() != v_aux.len() {
        return Err(invalid("estimate_snr: u and v_aux differ in length"));
    }
    if u.len() < 16 {
        return Err(invalid("estimate_snr: need at least 16 samples"));
    }
    if v_aux.iter().all(|x| *x == v_aux[0]) {
        return Err(Error::DegenerateInput("sum channel has zero variance".into()));
    }
    let n = u.len() as f64;
    let power = u.iter().map(|x| x.norm_sqr()).sum::<f64>() / n;
    let mean = v_aux.iter().sum::<Complex64>() / n;
    let var = v_aux.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return Err(Error::DegenerateInput("sum channel has zero variance".into()));
    }
    Ok((power - var) / var)
}

/// ĥ lookup: IF-error variance (cycles²) against SNR in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct HTable {
    pub snr_db: Vec<f64>,
    pub variance: Vec<f64>,
    pub samples_per_point: usize,
    pub seed: u64,
}

const HEADER: &str = "snr_db,variance";

impl HTable {
    pub fn new(snr_db: Vec<f64>, variance: Vec<f64>, samples_per_point: usize, seed: u64) -> Result<Self> {
        if snr_db.len() != variance.len() || snr_db.len() < 2 {
            return Err(invalid("h table needs at least two rows"));
        }
        if snr_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("h table snr_db must be strictly increasing"));
        }
        if variance.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(invalid("h table variances must be positive"));
        }
        Ok(Self { snr_db, variance, samples_per_point, seed })
    }

    /// ĥ at linear SNR. Below the grid the value saturates at the uniform
    /// limit; above it follows a c/SNR tail matched at the last row.
    pub fn eval(&self, snr: f64) -> f64 {
        let first = self.variance[0].max(UNIFORM_VARIANCE);
        if !(snr > 0.0) {
            return first;
        }
        let db = 10.0 * snr.log10();
        let n = self.snr_db.len();
        if db < self.snr_db[0] {
            return first;
        }
        if db >= self.snr_db[n - 1] {
            let edge = 10f64.powf(self.snr_db[n - 1] / 10.0);
            return self.variance[n - 1] * edge / snr;
        }
        let i = self.snr_db.partition_point(|&x| x <= db) - 1;
        let s = (db - self.snr_db[i]) / (self.snr_db[i + 1] - self.snr_db[i]);
        (self.variance[i].ln() * (1.0 - s) + self.variance[i + 1].ln() * s).exp()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# samples_per_point={} seed={}\n{HEADER}\n", self.samples_per_point, self.seed);
        for (s, v) in self.snr_db.iter().zip(&self.variance) {
            let _ = writeln!(out, "{s},{v:e}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (mut samples, mut seed) = (0usize, 0u64);
        let mut header_seen = false;
        let (mut snr, mut var) = (Vec::new(), Vec::new());
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                for kv in rest.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("samples_per_point", v)) => samples = v.parse().unwrap_or(0),
                        Some(("seed", v)) => seed = v.parse().unwrap_or(0),
                        _ => {}
                    }
                }
                continue;
            }
            if !header_seen {
                if line != HEADER {
                    return Err(Error::TableFormat { line: lineno, message: format!("expected header '{HEADER}'") });
                }
                header_seen = true;
                continue;
            }
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| Error::TableFormat { line: lineno, message: "expected two columns".into() })?;
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| Error::TableFormat { line: lineno, message: format!("bad number '{s}'") })
            };
            let (s, v) = (parse(a)?, parse(b)?);
            if let Some(&last) = snr.last() {
                if s <= last {
                    return Err(Error::TableFormat { line: lineno, message: "snr_db must be strictly increasing".into() });
                }
            }
            snr.push(s);
            var.push(v);
        }
        if !header_seen {
            return Err(Error::TableFormat { line: 1, message: format!("missing header '{HEADER}'") });
        }
        Self::new(snr, var, samples, seed).map_err(|e| Error::TableFormat { line: 0, message: e.to_string() })
    }
}

/// Fitted shot-noise statistics of the IF error against SNR: the variance
/// (ĥ) and the lag-one correlation used for the covariance off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotNoiseCurve {
    pub table: HTable,
    /// Lag-one correlation coefficient per grid point, in [−1/2, 0].
    pub lag1_correlation: Vec<f64>,
}

impl ShotNoiseCurve {
    /// Lag-one correlation at linear SNR; flat extrapolation off the grid.
    pub fn correlation(&self, snr: f64) -> f64 {
        let t = &self.table;
        let n = t.snr_db.len();
        if !(snr > 0.0) {
            return self.lag1_correlation[0];
        }
        let db = 10.0 * snr.log10();
        if db <= t.snr_db[0] {
            return self.lag1_correlation[0];
        }
        if db >= t.snr_db[n - 1] {
            return self.lag1_correlation[n - 1];
        }
        let i = t.snr_db.partition_point(|&x| x <= db) - 1;
        let s = (db - t.snr_db[i]) / (t.snr_db[i + 1] - t.snr_db[i]);
        self.lag1_correlation[i] * (1.0 - s) + self.lag1_correlation[i + 1] * s
    }

    /// Diagonal p = ĥ(SNR) and adjacent q = ρ·p.
    pub fn band(&self, snr: f64) -> (f64, f64) {
        let p = self.table.eval(snr);
        (p, self.correlation(snr) * p)
    }

    /// Curve from the table alone, with the high-SNR correlation −1/2.
    pub fn from_table(table: HTable) -> Self {
        let n = table.snr_db.len();
        Self { table, lag1_correlation: vec![-0.5; n] }
    }
}

/// Default grid −30..=40 dB in 1 dB steps.
pub fn default_snr_grid() -> Vec<f64> {
    (-30..=40).map(f64::from).collect()
}

/// Sample variance and lag-one correlation of the IF error at one SNR.
pub fn simulate_if_error(snr_db: f64, samples: usize, seed: u64) -> (f64, f64) {
    let snr = 10f64.powf(snr_db / 10.0);
    let scale = 1.0 / (2.0 * snr).sqrt();
    let mut rng = rng_from_seed(seed);
    let mut draw = || {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(1.0 + scale * re, scale * im).arg()
    };
    let mut prev = draw();
    let eps: Vec<f64> = (0..samples)
        .map(|_| {
            let next = draw();
            let e = wrap(next - prev, 2.0 * PI) / (2.0 * PI);
            prev = next;
            e
        })
        .collect();
    let n = eps.len() as f64;
    let mean = eps.iter().sum::<f64>() / n;
    let var = eps.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let cov = eps.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / (n - 1.0);
    (var, cov / var)
}

/// Pool-adjacent-violators fit of a non-increasing sequence.
fn isotonic_decreasing(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a >= b {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().expect("two blocks");
            *last = ((a * na as f64 + b * nb as f64) / (na + nb) as f64, na + nb);
        }
    }
    blocks.into_iter().flat_map(|(v, n)| std::iter::repeat_n(v, n)).collect()
}

/// Centered moving average; the window shrinks symmetrically at the ends.
fn smooth(y: &[f64], half: usize) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            y[i - h..=i + h].iter().sum::<f64>() / (2 * h + 1) as f64
        })
        .collect()
}

/// Monte Carlo fit of ĥ and the lag-one correlation over `snr_grid_db`.
pub fn h_fit(snr_grid_db: &[f64], samples_per_point: usize, seed: u64, exec: Exec) -> Result<ShotNoiseCurve> {
    if snr_grid_db.len() < 2 || snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("h_fit: SNR grid must be strictly increasing with at least two points"));
    }
    if samples_per_point < 2 {
        return Err(invalid("h_fit: need at least two samples per point"));
    }
    let idx: Vec<usize> = (0..snr_grid_db.len()).collect();
    let raw = exec.map(&idx, |&i| simulate_if_error(snr_grid_db[i], samples_per_point, derive_seed(seed, &[i as u64])));
    let log_var: Vec<f64> = raw.iter().map(|r| r.0.ln()).collect();
    let fitted: Vec<f64> = smooth(&isotonic_decreasing(&log_var), 1).into_iter().map(f64::exp).collect();
    let corr: Vec<f64> = smooth(&raw.iter().map(|r| r.1).collect::<Vec<_>>(), 1).into_iter().map(|c| c.clamp(-0.5, 0.0)).collect();
    Ok(ShotNoiseCurve {
        table: HTable::new(snr_grid_db.to_vec(), fitted, samples_per_point, seed)?,
        lag1_correlation: corr,
    })
}

/// σ̂² = L/(π f_s) + ĥ(SNR).
pub fn sigma_hat(linewidth: f64, fs: f64, snr: f64, h: &HTable) -> f64 {
    linewidth / (PI * fs) + h.eval(snr)
}

/// Inputs to the IFF likelihood derived from a measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCalibration {
    /// None when the sum channel is noiseless.
    pub snr_eta_hat: Option<f64>,
    pub sigma2_hat: f64,
    pub k: usize,
}
