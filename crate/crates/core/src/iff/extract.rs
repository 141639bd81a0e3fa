use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Phase-difference instantaneous frequency in cycles per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct IfSequence {
    /// ζ_n in (−1/2, 1/2].
    pub zeta: Vec<f64>,
    /// Midpoints t′_n = (t_n + t_{n+1})/2, s.
    pub times: Vec<f64>,
    pub sampling_rate: f64,
}

impl IfSequence {
    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }
}

/// Midpoint times for `n` samples at rate `fs`.
pub fn midpoint_times(n: usize, fs: f64) -> Vec<f64> {
    (0..n.saturating_sub(1)).map(|i| (i as f64 + 0.5) / fs).collect()
}

/// ζ_n = arg(u_{n+1} · conj(u_n)) / 2π.
pub fn extract_if(u: &[Complex64], fs: f64) -> Result<IfSequence> {
    if u.len() < 2 {
        return Err(invalid("extract_if: need at least two samples"));
    }
    if let Some(i) = u.iter().position(|v| v.norm_sqr() == 0.0) {
        return Err(Error::ZeroSample(i));
    }
    let zeta = u.windows(2).map(|p| (p[1] * p[0].conj()).arg() / (2.0 * PI)).collect();
    Ok(IfSequence { zeta, times: midpoint_times(u.len(), fs), sampling_rate: fs })
}
