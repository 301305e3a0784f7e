//! Damped least squares (Levenberg–Marquardt).
//!
//! Accepted steps never increase the sum of squared residuals. Iteration stops when
//! the relative step falls below `xtol`, when no damping level can reduce the cost
//! any further, or after `max_iter` accepted-or-rejected outer iterations.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iter: usize,
    pub xtol: f64,
    pub initial_lambda: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            xtol: 1e-10,
            initial_lambda: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    pub n_iter: usize,
    pub converged: bool,
    /// Residual-scaled covariance `s²(JᵀJ)⁻¹`, when `JᵀJ` is invertible.
    pub covariance: Option<DMatrix<f64>>,
    pub n_residuals: usize,
    /// Cost at the start and after every accepted step.
    pub cost_history: Vec<f64>,
}

fn cost_of(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn jacobian<F>(f: &F, p: &[f64], m: usize) -> DMatrix<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = p.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut plus = vec![0.0; m];
    let mut minus = vec![0.0; m];
    let mut q = p.to_vec();
    for j in 0..n {
        let h = 1e-6 * p[j].abs().max(1e-3);
        q[j] = p[j] + h;
        f(&q, &mut plus);
        q[j] = p[j] - h;
        f(&q, &mut minus);
        q[j] = p[j];
        for i in 0..m {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}

/// Minimizes `Σ r_i(p)²`. `residuals(p, out)` fills `out` (length `m`).
pub fn minimize<F>(residuals: F, m: usize, p0: &[f64], opts: &LmOptions) -> LmOutcome
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = p0.len();
    let mut p = p0.to_vec();
    let mut r = vec![0.0; m];
    residuals(&p, &mut r);
    let mut cost = cost_of(&r);
    let mut lambda = opts.initial_lambda;
    let mut converged = false;
    let mut n_iter = 0;
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; m];
    let mut cost_history = vec![cost];

    if !cost.is_finite() {
        return LmOutcome {
            params: p,
            cost,
            n_iter,
            converged: false,
            covariance: None,
            n_residuals: m,
            cost_history,
        };
    }

    'outer: while n_iter < opts.max_iter {
        n_iter += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        let jac = jacobian(&residuals, &p, m);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * DVector::from_column_slice(&r);
        let dmax = jtj.diagonal().max();
        loop {
            let mut a = jtj.clone();
            for j in 0..n {
                let d = jtj[(j, j)].max(1e-12 * dmax).max(1e-300);
                a[(j, j)] += lambda * d;
            }
            let step = a
                .clone()
                .cholesky()
                .map(|c| c.solve(&(-&grad)))
                .or_else(|| a.lu().solve(&(-&grad)));
            if let Some(step) = step {
                for j in 0..n {
                    trial[j] = p[j] + step[j];
                }
                residuals(&trial, &mut r_trial);
                let c_trial = cost_of(&r_trial);
                if c_trial.is_finite() && c_trial <= cost {
                    let step_norm = step.norm();
                    let p_norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let improved = c_trial < cost;
                    std::mem::swap(&mut p, &mut trial);
                    std::mem::swap(&mut r, &mut r_trial);
                    cost = c_trial;
                    cost_history.push(cost);
                    lambda = (lambda / 10.0).max(1e-12);
                    if step_norm <= opts.xtol * (p_norm + opts.xtol) || !improved {
                        converged = true;
                        break 'outer;
                    }
                    break;
                }
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // No damping level reduces the cost: a numerical minimum.
                converged = true;
                break 'outer;
            }
        }
    }

    let covariance = if m > n {
        let jac = jacobian(&residuals, &p, m);
        let s2 = cost / (m - n) as f64;
        (jac.transpose() * &jac).try_inverse().map(|inv| inv * s2)
    } else {
        None
    };

    LmOutcome {
        params: p,
        cost,
        n_iter,
        converged,
        covariance,
        n_residuals: m,
        cost_history,
    }
}
