use super::OptimResult;
use crate::error::{invalid, Result};

/// Settings for [`maximize_simplex`].
#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Stop when every vertex is within `tol * box width` of the best vertex
    /// in each coordinate and the objective spread is below `tol * |best|`.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial simplex edge as a fraction of the box width.
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 2000, initial_step: 0.25 }
    }
}

/// Nelder–Mead maximization inside a box. Trial points are clipped onto the
/// box instead of being penalized.
pub fn maximize_simplex<F>(
    mut objective: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: SimplexOptions,
) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 || lower.len() != n || upper.len() != n {
        return Err(invalid(format!(
            "maximize_simplex: dimension mismatch (x0 {}, lower {}, upper {})",
            n,
            lower.len(),
            upper.len()
        )));
    }
    for i in 0..n {
        if !(lower[i] <= x0[i] && x0[i] <= upper[i]) {
            return Err(invalid(format!("maximize_simplex: x0[{i}] outside bounds")));
        }
    }
    let width: Vec<f64> = (0..n).map(|i| (upper[i] - lower[i]).max(f64::MIN_POSITIVE)).collect();
    let clip = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lower[i], upper[i]);
        }
    };
    // minimize the negation internally
    let mut eval = |x: &[f64]| {
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            -v
        }
    };

    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        let step = opts.initial_step * width[i];
        p[i] = if p[i] + step <= upper[i] { p[i] + step } else { p[i] - step };
        clip(&mut p);
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        // stable sort keeps x0 first among ties
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let best = vals[0];
        let spread = vals[n] - best;
        let size_ok = (1..=n).all(|j| (0..n).all(|i| (pts[j][i] - pts[0][i]).abs() <= opts.tol * width[i]));
        if spread <= opts.tol * best.abs().max(f64::MIN_POSITIVE) && (size_ok || spread == 0.0) {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for p in &pts[..n] {
            for i in 0..n {
                centroid[i] += p[i] / n as f64;
            }
        }
        let along = |coef: f64| -> Vec<f64> {
            let mut p: Vec<f64> = (0..n).map(|i| centroid[i] + coef * (pts[n][i] - centroid[i])).collect();
            clip(&mut p);
            p
        };

        let xr = along(-alpha);
        let fr = eval(&xr);
        if fr < vals[0] {
            let xe = along(-gamma);
            let fe = eval(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(-rho);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(rho);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for j in 1..=n {
            let p: Vec<f64> = (0..n).map(|i| pts[0][i] + sigma * (pts[j][i] - pts[0][i])).collect();
            vals[j] = eval(&p);
            pts[j] = p;
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    Ok(OptimResult { x: pts[best].clone(), value: -vals[best], iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paraboloid_in_box() {
        let f = |x: &[f64]| -((x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2));
        let r = maximize_simplex(f, &[0.0, 0.0], &[-5.0, -5.0], &[5.0, 5.0], SimplexOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 2.0).abs() < 1e-6, "{:?}", r);
    }

    #[test]
    fn flat_objective_returns_start() {
        let r = maximize_simplex(|_| 3.0, &[0.5, -0.5], &[-1.0, -1.0], &[1.0, 1.0], SimplexOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.x, vec![0.5, -0.5]);
        assert_eq!(r.value, 3.0);
    }

    #[test]
    fn maximum_outside_box_is_clipped() {
        let f = |x: &[f64]| -((x[0] - 10.0).powi(2) + x[1].powi(2));
        let r = maximize_simplex(f, &[0.0, 0.5], &[-1.0, -1.0], &[1.0, 1.0], SimplexOptions::default()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-6);
        assert!(r.x[1].abs() < 1e-5);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(maximize_simplex(|_| 0.0, &[0.0, 0.0], &[-1.0], &[1.0, 1.0], SimplexOptions::default()).is_err());
        assert!(maximize_simplex(|_| 0.0, &[2.0], &[-1.0], &[1.0], SimplexOptions::default()).is_err());
    }

    #[test]
    fn concave_quadratic_within_ten_tol() {
        let tol = 1e-9;
        let f = |x: &[f64]| -(3.0 * (x[0] - 0.2).powi(2) + (x[1] + 0.4).powi(2) + 0.5 * (x[0] - 0.2) * (x[1] + 0.4));
        let opts = SimplexOptions { tol, ..Default::default() };
        let r = maximize_simplex(f, &[0.9, 0.9], &[-1.0, -1.0], &[1.0, 1.0], opts).unwrap();
        // tolerance is on the objective; map back through curvature
        assert!((r.x[0] - 0.2).abs() < 1e-4 && (r.x[1] + 0.4).abs() < 1e-4);
        assert!(r.value > -10.0 * tol);
    }
}
