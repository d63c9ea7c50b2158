//! Line-search SQP with damped BFGS and an elastic QP subproblem.
//!
//! Solves `min f(x)` subject to `c(x) ≥ 0`, linear rows `a·x ≤ b` and box
//! bounds. The nonlinear rows of each QP subproblem share one non-negative
//! slack penalized in the QP objective, so the subproblem is feasible even
//! when the linearization is not; box and linear rows stay hard. Steps are
//! accepted on the ℓ1 merit `f + μ Σ max(0, −cⱼ)`.

use alloc::vec;
use alloc::vec::Vec;

use super::qp;

pub(crate) trait Nlp {
    fn dim(&self) -> usize;
    fn num_constraints(&self) -> usize;
    fn lower(&self) -> &[f64];
    fn upper(&self) -> &[f64];
    /// Linear rows `(coefficients, bound)` meaning `coefficients · x ≤ bound`.
    fn linear_rows(&self) -> &[(Vec<f64>, f64)];
    fn objective(&self, x: &[f64]) -> f64;
    fn constraints(&self, x: &[f64], out: &mut [f64]);
    /// Objective gradient and the row-major `m × n` constraint Jacobian.
    fn derivatives(&self, x: &[f64], grad: &mut [f64], jac: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SqpOptions {
    pub max_iter: usize,
    pub step_tol: f64,
    pub feas_tol: f64,
    pub elastic_penalty: f64,
}

impl Default for SqpOptions {
    fn default() -> Self {
        Self {
            max_iter: 60,
            step_tol: 1e-7,
            feas_tol: 1e-9,
            elastic_penalty: 1e2,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SqpOutcome {
    pub x: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

fn violation(c: &[f64]) -> f64 {
    c.iter().map(|&v| (-v).max(0.0)).sum()
}

pub(crate) fn minimize<P: Nlp>(problem: &P, x0: &[f64], opts: &SqpOptions) -> SqpOutcome {
    let n = problem.dim();
    let m = problem.num_constraints();
    let (lo, hi) = (problem.lower(), problem.upper());
    let linear = problem.linear_rows();
    let clip = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };

    let mut x = x0.to_vec();
    clip(&mut x);
    let mut hess = vec![0.0; n * n];
    for i in 0..n {
        hess[i * n + i] = 1.0;
    }
    let mut grad = vec![0.0; n];
    let mut jac = vec![0.0; m * n];
    let mut c = vec![0.0; m];
    let mut c_trial = vec![0.0; m];
    let mut mu: f64 = 1.0;

    // QP in (p, σ): `n + 1` variables.
    let nq = n + 1;
    let rows_total = m + 1 + linear.len() + 2 * n;
    let mut g_qp = vec![0.0; nq * nq];
    let mut a_qp = vec![0.0; nq];
    let mut rows = vec![0.0; rows_total * nq];
    let mut rhs = vec![0.0; rows_total];

    let mut converged = false;
    let mut iterations = 0;
    problem.constraints(&x, &mut c);
    let mut f = problem.objective(&x);
    problem.derivatives(&x, &mut grad, &mut jac);

    while iterations < opts.max_iter {
        iterations += 1;

        g_qp.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            for j in 0..n {
                g_qp[i * nq + j] = hess[i * n + j];
            }
        }
        g_qp[n * nq + n] = 1e-6;
        a_qp[..n].copy_from_slice(&grad);
        a_qp[n] = opts.elastic_penalty;
        rows.iter_mut().for_each(|v| *v = 0.0);
        let mut r = 0;
        for j in 0..m {
            rows[r * nq..r * nq + n].copy_from_slice(&jac[j * n..(j + 1) * n]);
            rows[r * nq + n] = 1.0;
            rhs[r] = -c[j];
            r += 1;
        }
        rows[r * nq + n] = 1.0;
        rhs[r] = 0.0;
        r += 1;
        for (coef, bound) in linear {
            let ax: f64 = coef.iter().zip(&x).map(|(a, b)| a * b).sum();
            for i in 0..n {
                rows[r * nq + i] = -coef[i];
            }
            rhs[r] = ax - bound;
            r += 1;
        }
        for i in 0..n {
            rows[r * nq + i] = 1.0;
            rhs[r] = lo[i] - x[i];
            r += 1;
            rows[r * nq + i] = -1.0;
            rhs[r] = x[i] - hi[i];
            r += 1;
        }

        let Ok(sol) = qp::solve(&g_qp, &a_qp, &rows, &rhs) else {
            break;
        };
        let step = &sol.x[..n];
        let lambda = &sol.multipliers[..m];

        let step_norm = step.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let x_norm = x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let viol = violation(&c);
        if step_norm <= opts.step_tol * (1.0 + x_norm) && viol <= opts.feas_tol {
            converged = true;
            break;
        }

        let lambda_max = lambda.iter().fold(0.0f64, |acc, v| acc.max(*v));
        if mu < 1.5 * lambda_max {
            mu = 2.0 * lambda_max;
        }
        let merit = f + mu * viol;
        let slope = step.iter().zip(&grad).map(|(p, g)| p * g).sum::<f64>() - mu * viol;
        let slope = slope.min(0.0);

        let mut alpha = 1.0;
        let mut accepted = None;
        let mut x_trial = vec![0.0; n];
        for _ in 0..30 {
            for i in 0..n {
                x_trial[i] = x[i] + alpha * step[i];
            }
            clip(&mut x_trial);
            problem.constraints(&x_trial, &mut c_trial);
            let f_trial = problem.objective(&x_trial);
            if f_trial + mu * violation(&c_trial) <= merit + 1e-4 * alpha * slope {
                accepted = Some(f_trial);
                break;
            }
            alpha *= 0.5;
        }
        let Some(f_new) = accepted else {
            converged = viol <= opts.feas_tol;
            break;
        };

        // ∇L = ∇f − Jᵀλ at old and new points.
        let lagrangian_grad = |grad: &[f64], jac: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| grad[i] - (0..m).map(|j| jac[j * n + i] * lambda[j]).sum::<f64>())
                .collect()
        };
        let old_lg = lagrangian_grad(&grad, &jac);
        let s: Vec<f64> = x_trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        x.copy_from_slice(&x_trial);
        c.copy_from_slice(&c_trial);
        f = f_new;
        problem.derivatives(&x, &mut grad, &mut jac);
        let new_lg = lagrangian_grad(&grad, &jac);
        let y: Vec<f64> = new_lg.iter().zip(&old_lg).map(|(a, b)| a - b).collect();
        damped_bfgs(&mut hess, n, &s, &y);
    }

    SqpOutcome {
        x,
        converged,
        iterations,
    }
}

/// Powell-damped BFGS update keeping `hess` positive definite.
fn damped_bfgs(hess: &mut [f64], n: usize, s: &[f64], y: &[f64]) {
    let bs: Vec<f64> = (0..n).map(|i| (0..n).map(|j| hess[i * n + j] * s[j]).sum()).collect();
    let sbs: f64 = s.iter().zip(&bs).map(|(a, b)| a * b).sum();
    if !(sbs > 1e-16) {
        return;
    }
    let sy: f64 = s.iter().zip(y).map(|(a, b)| a * b).sum();
    let theta = if sy >= 0.2 * sbs { 1.0 } else { 0.8 * sbs / (sbs - sy) };
    let r: Vec<f64> = (0..n).map(|i| theta * y[i] + (1.0 - theta) * bs[i]).collect();
    let sr: f64 = s.iter().zip(&r).map(|(a, b)| a * b).sum();
    if !(sr > 1e-16) {
        return;
    }
    for i in 0..n {
        for j in 0..n {
            hess[i * n + j] += r[i] * r[j] / sr - bs[i] * bs[j] / sbs;
        }
    }
}
