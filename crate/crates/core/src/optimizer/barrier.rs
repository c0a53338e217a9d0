//! Log-barrier interior-point method for
//! `min s  s.t.  sI - A(w) ⪰ 0,  sI + A(w) ⪰ 0`, with `A(w) = W(w) - 11ᵀ/n`.
//!
//! Gradients and Hessians are formed in the eigenbasis of `A`. With
//! `c_e = Qᵀ(e_i - e_j)`, `p_k = 1/(s - λ_k)` and `q_k = 1/(s + λ_k)`:
//! `∂/∂w_e = -Σ c²p + Σ c²q`, `∂/∂s = t - Σp - Σq`,
//! `H_ef = (Σ c_e c_f p)² + (Σ c_e c_f q)²`, `H_es = Σ c_e² p² - Σ c_e² q²`,
//! `H_ss = Σ p² + Σ q²`.

use nalgebra::{DMatrix, DVector};

use super::{deviation_matrix, Problem};
use crate::error::Result;
use crate::spectral::{eig_sym_matrix, eigenvalues_desc};

const MU: f64 = 20.0;
const NEWTON_TOL: f64 = 1e-11;
const MAX_NEWTON_PER_CENTER: usize = 200;
const ARMIJO: f64 = 0.25;

pub(crate) struct Polish {
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub newton_steps: usize,
    pub reached_gap: bool,
}

fn barrier_value(t: f64, s: f64, eigenvalues: &[f64]) -> f64 {
    let mut acc = t * s;
    for &l in eigenvalues {
        let (a, b) = (s - l, s + l);
        if a <= 0.0 || b <= 0.0 {
            return f64::INFINITY;
        }
        acc -= a.ln() + b.ln();
    }
    acc
}

fn spectral_norm(eigenvalues: &[f64]) -> f64 {
    eigenvalues[0].abs().max(eigenvalues[eigenvalues.len() - 1].abs())
}

/// Runs the barrier method from the current free weights, whose objective
/// value is `f0`. Returns the best point seen by the true objective.
pub(crate) fn polish(problem: &mut Problem, f0: f64, gap_tol: f64) -> Result<Polish> {
    let n = problem.n;
    let p = problem.free.len();
    let mut x = problem.free_values();
    let mut s = f0 * 1.05 + 1e-4;
    let mut t = 2.0 * n as f64 / s;
    let mut best_x = x.clone();
    let mut best_f = f0;
    let mut newton_steps = 0;
    let mut reached_gap = false;

    'outer: loop {
        for _ in 0..MAX_NEWTON_PER_CENTER {
            problem.set_free(&x);
            let spec = eig_sym_matrix(&deviation_matrix(n, &problem.weights))?;
            let lam = &spec.eigenvalues;
            let q = &spec.eigenvectors;
            let dp: Vec<f64> = lam.iter().map(|l| 1.0 / (s - l)).collect();
            let dm: Vec<f64> = lam.iter().map(|l| 1.0 / (s + l)).collect();

            let mut c = DMatrix::<f64>::zeros(p, n);
            for (r, e) in problem.free.iter().enumerate() {
                for k in 0..n {
                    c[(r, k)] = q[(e.u, k)] - q[(e.v, k)];
                }
            }
            let mut cp = c.clone();
            let mut cm = c.clone();
            for k in 0..n {
                cp.column_mut(k).scale_mut(dp[k]);
                cm.column_mut(k).scale_mut(dm[k]);
            }
            let gp = &cp * c.transpose();
            let gm = &cm * c.transpose();

            let mut grad = DVector::<f64>::zeros(p + 1);
            let mut hess = DMatrix::<f64>::zeros(p + 1, p + 1);
            for a in 0..p {
                grad[a] = -gp[(a, a)] + gm[(a, a)];
                for b in 0..p {
                    hess[(a, b)] = gp[(a, b)].powi(2) + gm[(a, b)].powi(2);
                }
                let mut hs = 0.0;
                for k in 0..n {
                    let c2 = c[(a, k)] * c[(a, k)];
                    hs += c2 * (dp[k] * dp[k] - dm[k] * dm[k]);
                }
                hess[(a, p)] = hs;
                hess[(p, a)] = hs;
            }
            grad[p] = t - dp.iter().sum::<f64>() - dm.iter().sum::<f64>();
            hess[(p, p)] = dp.iter().map(|v| v * v).sum::<f64>() + dm.iter().map(|v| v * v).sum::<f64>();

            let Some(step) = solve_newton(&hess, &grad) else {
                break 'outer;
            };
            let decrement = -grad.dot(&step);
            if decrement / 2.0 <= NEWTON_TOL {
                break;
            }
            let phi = barrier_value(t, s, lam);
            let mut alpha = 1.0;
            let mut accepted = None;
            while alpha > 1e-16 {
                let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, di)| xi + alpha * di).collect();
                let sn = s + alpha * step[p];
                problem.set_free(&xn);
                let ev = eigenvalues_desc(&deviation_matrix(n, &problem.weights))?;
                let phin = barrier_value(t, sn, &ev);
                if phin <= phi - ARMIJO * alpha * decrement {
                    accepted = Some((xn, sn, spectral_norm(&ev)));
                    break;
                }
                alpha *= 0.5;
            }
            let Some((xn, sn, f)) = accepted else {
                break 'outer;
            };
            newton_steps += 1;
            x = xn;
            s = sn;
            if f < best_f {
                best_f = f;
                best_x.clone_from(&x);
            }
            if let Some(h) = problem.history.as_deref_mut() {
                h.push(best_f);
            }
        }
        if 2.0 * n as f64 / t <= gap_tol {
            reached_gap = true;
            break;
        }
        t *= MU;
    }
    problem.set_free(&best_x);
    Ok(Polish {
        best_x,
        best_f,
        newton_steps,
        reached_gap,
    })
}

/// Solves `H d = -g` by Cholesky, adding a small ridge if H is numerically
/// indefinite.
fn solve_newton(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = hess.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for ridge in [0.0, 1e-14, 1e-12, 1e-10] {
        let mut h = hess.clone();
        for i in 0..h.nrows() {
            h[(i, i)] += ridge * scale;
        }
        if let Some(chol) = h.cholesky() {
            let d = chol.solve(&(-grad));
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
    }
    None
}
