use super::OptimResult;

/// Settings for [`maximize_quasi_newton`].
#[derive(Debug, Clone, Copy)]
pub struct QuasiNewtonOptions {
    /// Converged once the gradient infinity norm drops below this.
    pub grad_tol: f64,
    /// Converged once an accepted step moves less than this (infinity norm).
    pub step_tol: f64,
    pub max_iter: usize,
    /// Upper bound on the infinity norm of a trial step.
    pub max_step: Option<f64>,
}

impl Default for QuasiNewtonOptions {
    fn default() -> Self {
        Self { grad_tol: 1e-8, step_tol: 1e-12, max_iter: 200, max_step: None }
    }
}

const ARMIJO_C1: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const MAX_BACKTRACK: usize = 60;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// BFGS ascent with Armijo backtracking.
///
/// `f_and_grad` returns the objective and its gradient at a point. On a
/// line-search failure the best point so far is returned with
/// `converged = false`.
pub fn maximize_quasi_newton<F>(mut f_and_grad: F, x0: &[f64], opts: &QuasiNewtonOptions) -> OptimResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f_and_grad(&x);
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return OptimResult { x, value: fx, iterations: 0, converged: false };
    }
    // inverse Hessian of -f
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    let mut first = true;

    for iter in 0..opts.max_iter {
        if inf_norm(&g) <= opts.grad_tol {
            return OptimResult { x, value: fx, iterations: iter, converged: true };
        }
        let mut p: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * g[j]).sum()).collect();
        let mut slope = dot(&g, &p);
        if !(slope > 0.0) {
            // not an ascent direction; restart from steepest ascent
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] = if i == j { 1.0 } else { 0.0 };
                }
            }
            p = g.clone();
            slope = dot(&g, &p);
        }
        if let Some(cap) = opts.max_step {
            let norm = inf_norm(&p);
            if norm > cap {
                let s = cap / norm;
                p.iter_mut().for_each(|v| *v *= s);
                slope *= s;
            }
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let xt: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + alpha * b).collect();
            let (ft, gt) = f_and_grad(&xt);
            if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && ft >= fx + ARMIJO_C1 * alpha * slope {
                accepted = Some((xt, ft, gt));
                break;
            }
            alpha *= SHRINK;
        }
        let Some((xn, fnew, gn)) = accepted else {
            return OptimResult { x, value: fx, iterations: iter, converged: false };
        };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        // gradient of -f changes by -(gn - g)
        let y: Vec<f64> = g.iter().zip(&gn).map(|(a, b)| a - b).collect();
        let step = inf_norm(&s);
        x = xn;
        fx = fnew;
        g = gn;
        if step <= opts.step_tol {
            return OptimResult { x, value: fx, iterations: iter + 1, converged: true };
        }

        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if first {
                let scale = sy / dot(&y, &y);
                h.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..n {
                    h[i * n + i] = scale;
                }
                first = false;
            }
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum()).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
    }
    let converged = inf_norm(&g) <= opts.grad_tol;
    OptimResult { x, value: fx, iterations: opts.max_iter, converged }
}
