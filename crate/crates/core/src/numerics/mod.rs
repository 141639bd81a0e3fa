//! Shared numerical kernels: centered modulo, Fourier-domain helpers and
//! the three local optimizers used by the estimators.

mod brent;
mod fourier;
mod quasi_newton;
mod simplex;

pub use brent::maximize_scalar_bounded;
pub use fourier::{upsample_fourier, FftPair};
pub use quasi_newton::{maximize_quasi_newton, QuasiNewtonOptions};
pub use simplex::{maximize_simplex, SimplexOptions};

use crate::error::{invalid, Result};

/// Output of the local optimizers.
///
/// `value` is the objective at `x` (maximization convention).
#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Wraps `x` into `(-r/2, r/2]`.
pub fn centered_modulo(x: f64, r: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(invalid(format!("centered_modulo: non-finite x = {x}")));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid(format!("centered_modulo: modulus must be positive, got {r}")));
    }
    Ok(wrap(x, r))
}

/// Unchecked form of [`centered_modulo`] for hot loops.
#[inline]
pub fn wrap(x: f64, r: f64) -> f64 {
    let y = x - r * (x / r - 0.5).ceil();
    // ceil can land one period off when x/r - 0.5 rounds onto an integer
    if y > 0.5 * r {
        y - r
    } else if y <= -0.5 * r {
        y + r
    } else {
        y
    }
}

/// `wrap(x, 1.0)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    wrap(x, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn centered_modulo_examples() {
        assert_eq!(centered_modulo(0.0, 1.0).unwrap(), 0.0);
        assert!((centered_modulo(0.6, 1.0).unwrap() + 0.4).abs() < 1e-15);
        assert_eq!(centered_modulo(-0.5, 1.0).unwrap(), 0.5);
        assert_eq!(centered_modulo(0.5, 1.0).unwrap(), 0.5);
        assert_eq!(centered_modulo(1.5, 1.0).unwrap(), 0.5);
    }

    #[test]
    fn centered_modulo_rejects_bad_input() {
        assert!(centered_modulo(f64::NAN, 1.0).is_err());
        assert!(centered_modulo(f64::INFINITY, 1.0).is_err());
        assert!(centered_modulo(1.0, 0.0).is_err());
        assert!(centered_modulo(1.0, -2.0).is_err());
    }

    proptest! {
        #[test]
        fn wrap_range_and_congruence(x in -1e6f64..1e6, r in 1e-3f64..1e3) {
            let y = centered_modulo(x, r).unwrap();
            prop_assert!(y > -0.5 * r && y <= 0.5 * r);
            let k = ((x - y) / r).round();
            prop_assert!((x - y - k * r).abs() <= 1e-9 * x.abs().max(r));
        }

        #[test]
        fn wrap_is_idempotent(x in -1e4f64..1e4, r in 1e-2f64..1e2) {
            let y = wrap(x, r);
            prop_assert_eq!(wrap(y, r), y);
        }

        #[test]
        fn wrap_is_periodic(x in -100.0f64..100.0, r in 0.1f64..10.0, k in -3i32..=3) {
            let a = wrap(x, r);
            let b = wrap(x + k as f64 * r, r);
            // allow one-ulp drift and the (-r/2, r/2] seam
            let d = wrap(a - b, r).abs();
            prop_assert!(d <= 1e-12 * (x.abs() + r));
        }
    }
}
