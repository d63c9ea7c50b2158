//! Dense strictly convex QP by the Goldfarb–Idnani dual active-set method:
//!
//! ```text
//! min ½ yᵀGy + aᵀy   s.t.   rowᵢ · y ≥ rhsᵢ
//! ```
//!
//! Problems here have a few dozen variables at most, so each step solves its
//! small linear systems from scratch instead of updating factorizations.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum QpError {
    NotPositiveDefinite,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub(crate) struct QpSolution {
    pub x: Vec<f64>,
    /// One multiplier per constraint row, zero for inactive rows.
    pub multipliers: Vec<f64>,
}

/// In-place Cholesky factor (lower triangle) of an `n×n` row-major matrix.
fn cholesky(m: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = m[j * n + j];
        for k in 0..j {
            d -= m[j * n + k] * m[j * n + k];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = sqrt(d);
        m[j * n + j] = d;
        for i in j + 1..n {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= m[i * n + k] * m[j * n + k];
            }
            m[i * n + j] = s / d;
        }
    }
    true
}

fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn solve(g: &[f64], a: &[f64], rows: &[f64], rhs: &[f64]) -> Result<QpSolution, QpError> {
    let n = a.len();
    let m = rhs.len();
    debug_assert_eq!(g.len(), n * n);
    debug_assert_eq!(rows.len(), m * n);

    let mut l = g.to_vec();
    if !cholesky(&mut l, n) {
        return Err(QpError::NotPositiveDefinite);
    }
    let mut g_inv = vec![0.0; n * n];
    for j in 0..n {
        let mut col = vec![0.0; n];
        col[j] = 1.0;
        cholesky_solve(&l, n, &mut col);
        for i in 0..n {
            g_inv[i * n + j] = col[i];
        }
    }
    let mat_vec = |mat: &[f64], v: &[f64], out: &mut [f64]| {
        for i in 0..n {
            out[i] = dot(&mat[i * n..(i + 1) * n], v);
        }
    };
    let row = |i: usize| &rows[i * n..(i + 1) * n];
    let norms: Vec<f64> = (0..m).map(|i| sqrt(dot(row(i), row(i))).max(1e-300)).collect();

    let mut x = vec![0.0; n];
    mat_vec(&g_inv, a, &mut x);
    x.iter_mut().for_each(|v| *v = -*v);

    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut g_inv_n: Vec<Vec<f64>> = Vec::new();
    let mut z = vec![0.0; n];
    let mut g_inv_np = vec![0.0; n];
    let max_steps = 10 * (n + m) + 20;
    let mut steps = 0;

    loop {
        // Most violated constraint, by normalized slack.
        let mut pick = None;
        let mut worst = 0.0;
        for i in 0..m {
            if active.contains(&i) {
                continue;
            }
            let s = (dot(row(i), &x) - rhs[i]) / norms[i];
            let tol = 1e-11 * (1.0 + rhs[i].abs() / norms[i]);
            if s < -tol && s < worst {
                worst = s;
                pick = Some(i);
            }
        }
        let Some(p) = pick else {
            let mut multipliers = vec![0.0; m];
            for (&i, &ui) in active.iter().zip(&u) {
                multipliers[i] = ui;
            }
            return Ok(QpSolution { x, multipliers });
        };
        let np = row(p);
        mat_vec(&g_inv, np, &mut g_inv_np);
        let mut u_p = 0.0;

        loop {
            steps += 1;
            if steps > max_steps {
                return Err(QpError::IterationLimit);
            }
            // r = (NᵀG⁻¹N)⁻¹ NᵀG⁻¹ n_p,  z = G⁻¹(n_p − N r).
            let q = active.len();
            g_inv_n.resize(q, Vec::new());
            for (k, &i) in active.iter().enumerate() {
                let mut col = vec![0.0; n];
                mat_vec(&g_inv, row(i), &mut col);
                g_inv_n[k] = col;
            }
            let mut r = vec![0.0; q];
            if q > 0 {
                let mut mm = vec![0.0; q * q];
                for (a_idx, &ia) in active.iter().enumerate() {
                    for b_idx in 0..q {
                        mm[a_idx * q + b_idx] = dot(row(ia), &g_inv_n[b_idx]);
                    }
                    r[a_idx] = dot(row(ia), &g_inv_np);
                }
                if !cholesky(&mut mm, q) {
                    return Err(QpError::NotPositiveDefinite);
                }
                cholesky_solve(&mm, q, &mut r);
            }
            z.copy_from_slice(&g_inv_np);
            for (k, rk) in r.iter().enumerate() {
                for (zi, ni) in z.iter_mut().zip(&g_inv_n[k]) {
                    *zi -= rk * ni;
                }
            }

            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (k, &rk) in r.iter().enumerate() {
                if rk > 1e-14 {
                    let ratio = u[k] / rk;
                    if ratio < t1 {
                        t1 = ratio;
                        drop = Some(k);
                    }
                }
            }
            let zn = dot(&z, np);
            let z_norm = sqrt(dot(&z, &z));
            let s_p = dot(np, &x) - rhs[p];
            let t2 = if z_norm <= 1e-14 * norms[p] || zn <= 0.0 {
                f64::INFINITY
            } else {
                -s_p / zn
            };

            if t1.is_infinite() && t2.is_infinite() {
                return Err(QpError::Infeasible);
            }
            if t2.is_infinite() {
                for (uk, rk) in u.iter_mut().zip(&r) {
                    *uk -= t1 * rk;
                }
                u_p += t1;
                let k = drop.expect("finite t1 has an index");
                active.remove(k);
                u.remove(k);
                continue;
            }
            let t = t1.min(t2);
            for (xi, zi) in x.iter_mut().zip(&z) {
                *xi += t * zi;
            }
            for (uk, rk) in u.iter_mut().zip(&r) {
                *uk -= t * rk;
            }
            u_p += t;
            if t2 <= t1 {
                active.push(p);
                u.push(u_p);
                break;
            }
            let k = drop.expect("partial step has an index");
            active.remove(k);
            u.remove(k);
        }
    }
}
