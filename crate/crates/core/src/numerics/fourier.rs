use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};

/// Forward/inverse plans of one length. Plans are `Send + Sync`; scratch
/// buffers are allocated per call.
#[derive(Clone)]
pub struct FftPair {
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
    len: usize,
}

impl FftPair {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Inverse transform in place, scaled by `1/len`.
    pub fn inverse_normalized(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let s = 1.0 / self.len as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }
}

/// Band-limited interpolation by zero-padding the DFT.
///
/// Sample `k*factor` of the output equals input sample `k`. For even input
/// lengths the Nyquist bin is split evenly between the positive and
/// negative halves so that real signals stay real.
pub fn upsample_fourier(signal: &[Complex64], factor: usize) -> Result<Vec<Complex64>> {
    let n = signal.len();
    if n == 0 {
        return Err(invalid("upsample_fourier: empty input"));
    }
    if factor == 0 {
        return Err(invalid("upsample_fourier: factor must be >= 1"));
    }
    if factor == 1 {
        return Ok(signal.to_vec());
    }
    let m = n * factor;
    let mut spec = signal.to_vec();
    FftPair::new(n).forward(&mut spec);

    let mut padded = vec![Complex64::new(0.0, 0.0); m];
    let half = n / 2;
    if n.is_multiple_of(2) {
        padded[..half].copy_from_slice(&spec[..half]);
        let nyq = spec[half] * 0.5;
        padded[half] = nyq;
        padded[m - half] = nyq;
        for k in 1..half {
            padded[m - k] = spec[n - k];
        }
    } else {
        padded[..=half].copy_from_slice(&spec[..=half]);
        for k in 1..=half {
            padded[m - k] = spec[n - k];
        }
    }
    FftPair::new(m).inverse.process(&mut padded);
    // forward is unnormalized; net scale is 1/n
    let s = 1.0 / n as f64;
    for v in padded.iter_mut() {
        *v *= s;
    }
    Ok(padded)
}
