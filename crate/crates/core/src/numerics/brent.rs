use super::OptimResult;
use crate::error::{invalid, Error, Result};

const GOLDEN: f64 = 0.381_966_011_250_105_1;
const MAX_ITER: usize = 500;

/// Brent's bracketed scalar search (golden section with parabolic steps),
/// run on the negated objective so that a local maximum inside `[lo, hi]`
/// is returned. The search starts from `x0` rather than the golden point.
pub fn maximize_scalar_bounded<F>(mut objective: F, lo: f64, hi: f64, x0: f64, tol: f64) -> Result<OptimResult>
where
    F: FnMut(f64) -> f64,
{
    if !(lo < hi) || !(lo <= x0 && x0 <= hi) {
        return Err(invalid(format!("maximize_scalar_bounded: need lo <= x0 <= hi, got [{lo}, {hi}] x0 = {x0}")));
    }
    if !(tol > 0.0) {
        return Err(invalid("maximize_scalar_bounded: tol must be positive"));
    }
    let rel = f64::EPSILON.sqrt();

    let mut f = |x: f64, last: f64| -> Result<f64> {
        let v = objective(x);
        if v.is_finite() {
            Ok(-v)
        } else {
            Err(Error::NumericFailure {
                message: format!("objective returned {v} at {x}"),
                last_point: vec![last],
            })
        }
    };

    let (mut a, mut b) = (lo, hi);
    let mut x = x0;
    let mut w = x0;
    let mut v = x0;
    let mut fx = f(x, x)?;
    let mut fw = fx;
    let mut fv = fx;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for iter in 0..MAX_ITER {
        let xm = 0.5 * (a + b);
        let tol1 = rel * x.abs() + tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            return Ok(OptimResult { x: vec![x], value: -fx, iterations: iter, converged: true });
        }
        let mut golden = true;
        if e.abs() > tol1 {
            // parabola through x, w, v
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u, x)?;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok(OptimResult { x: vec![x], value: -fx, iterations: MAX_ITER, converged: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_vertex() {
        let r = maximize_scalar_bounded(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 0.5, 1e-10).unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 0.3).abs() < 1e-9, "{:?}", r);
        assert!((r.value - 0.0).abs() < 1e-18);
    }

    #[test]
    fn cosine_peak() {
        let r = maximize_scalar_bounded(f64::cos, -1.0, 1.0, 0.2, 1e-10).unwrap();
        // cos is flat to round-off within ~1e-8 of the peak
        assert!(r.x[0].abs() < 1e-7);
        assert!((r.value - r.x[0].cos()).abs() == 0.0);
    }

    #[test]
    fn boundary_maximum_stays_in_bounds() {
        let r = maximize_scalar_bounded(|x| x, 0.0, 2.0, 1.0, 1e-10).unwrap();
        assert!(r.x[0] <= 2.0 && r.x[0] > 2.0 - 1e-7);
    }

    #[test]
    fn concave_quadratic_within_ten_tol() {
        for &(c, tol) in &[(1.234, 1e-8), (-3.5, 1e-6), (7.0, 1e-10)] {
            let r = maximize_scalar_bounded(|x| -2.0 * (x - c) * (x - c) + 1.0, c - 5.0, c + 4.0, c + 1.0, tol).unwrap();
            assert!((r.x[0] - c).abs() <= 10.0 * tol);
        }
    }

    #[test]
    fn non_finite_objective_reports_last_point() {
        let err = maximize_scalar_bounded(|x| if x > 0.7 { f64::NAN } else { x }, 0.0, 1.0, 0.5, 1e-10).unwrap_err();
        match err {
            Error::NumericFailure { last_point, .. } => assert!(last_point[0] <= 0.7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_bracket() {
        assert!(maximize_scalar_bounded(|x| x, 1.0, 0.0, 0.5, 1e-6).is_err());
        assert!(maximize_scalar_bounded(|x| x, 0.0, 1.0, 1.5, 1e-6).is_err());
        assert!(maximize_scalar_bounded(|x| x, 0.0, 1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn sinc_slice_matches_dense_grid() {
        // squared Dirichlet kernel peak, the shape seen by the delay refinement
        let n = 64.0;
        let peak = 0.4137;
        let f = |x: f64| {
            let y = std::f64::consts::PI * (x - peak);
            if y.abs() < 1e-12 {
                n * n
            } else {
                ((n * y).sin() / y.sin()).powi(2)
            }
        };
        let (lo, hi) = (0.40, 0.43);
        let grid_best = (0..=300_000)
            .map(|i| lo + (hi - lo) * i as f64 / 300_000.0)
            .fold((lo, f64::MIN), |acc, x| if f(x) > acc.1 { (x, f(x)) } else { acc });
        let r = maximize_scalar_bounded(f, lo, hi, 0.415, 1e-12).unwrap();
        assert!((r.x[0] - grid_best.0).abs() < 2e-7);
        assert!(r.value >= grid_best.1 - 1e-9 * grid_best.1);
    }
}
