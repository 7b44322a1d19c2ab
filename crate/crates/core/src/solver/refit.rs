use faer::linalg::solvers::Solve;
use faer::{Col, Mat, Side};

use super::engine::Problem;
use super::{FitResult, SolverConfig};
use crate::error::{Error, Result};

/// Largest standardized coefficient magnitude allowed in a refit.
pub const REFIT_CAP: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RefitResult {
    pub fit: FitResult,
    /// Support columns removed as linearly dependent on earlier ones.
    pub dropped: Vec<usize>,
    /// Some coefficient hit the cap, a sign of (quasi-)separation.
    pub capped: bool,
}

/// Unpenalized maximum likelihood on a fixed support, by Newton's method
/// with backtracking on the standardized columns.
pub fn fit_unpenalized(problem: &Problem, support: &[usize], cfg: &SolverConfig) -> Result<RefitResult> {
    let design = problem.design;
    let scheme = problem.scheme;
    let m = scheme.len();
    let k_all = design.n_cols();
    if let Some(&bad) = support.iter().find(|&&k| k >= k_all) {
        return Err(Error::IndexOutOfRange(format!("support column {bad} of {k_all}")));
    }

    // rank check by ω-weighted modified Gram–Schmidt, intercept first
    let weights = &scheme.weights;
    let wdot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(weights).map(|((x, y), w)| x * y * w).sum() };
    let mut basis: Vec<Vec<f64>> = vec![{
        let norm = wdot(&vec![1.0; m], &vec![1.0; m]).sqrt();
        vec![1.0 / norm; m]
    }];
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for &k in support {
        if design.scales[k].constant {
            dropped.push(k);
            continue;
        }
        let col = design.standardized_column(k);
        let norm0 = wdot(&col, &col).sqrt();
        let mut v = col.clone();
        for q in &basis {
            let c = wdot(&v, q);
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
        let norm = wdot(&v, &v).sqrt();
        if !(norm > 1e-8 * norm0.max(1e-300)) {
            dropped.push(k);
            continue;
        }
        v.iter_mut().for_each(|a| *a /= norm);
        basis.push(v);
        kept.push(k);
        columns.push(col);
    }

    let s = kept.len();
    let eta_of = |b: &[f64]| -> Vec<f64> {
        let mut eta = vec![b[0]; m];
        for (j, col) in columns.iter().enumerate() {
            let c = b[j + 1];
            if c != 0.0 {
                eta.iter_mut().zip(col).for_each(|(e, x)| *e += c * x);
            }
        }
        eta
    };

    let x = Mat::<f64>::from_fn(m, s + 1, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] });
    let mut beta = vec![0.0; s + 1];
    beta[0] = problem.null_intercept();
    let mut eta = eta_of(&beta);
    let mut ll = problem.loglik(&eta);
    let mut converged = false;
    let mut capped = false;
    let mut iterations = 0;
    let mut last_gmax = f64::INFINITY;
    for it in 1..=cfg.max_outer {
        iterations = it;
        let mu: Vec<f64> = eta.iter().zip(weights).map(|(e, w)| w * e.exp()).collect();
        let resid: Vec<f64> = problem.y.iter().zip(&mu).map(|(y, u)| y - u).collect();
        let root = Col::<f64>::from_fn(m, |i| mu[i].sqrt());
        let scaled = Mat::<f64>::from_fn(m, s + 1, |i, j| root[i] * x[(i, j)]);
        let hess = scaled.transpose() * &scaled;
        let r = Col::<f64>::from_fn(m, |i| resid[i]);
        let grad = x.transpose() * &r;
        let gmax = (0..=s).map(|a| grad[a].abs()).fold(0.0, f64::max);
        last_gmax = gmax;
        if gmax <= 1e-10 * problem.n_hat().max(1.0) {
            converged = true;
            break;
        }
        let step = match hess.llt(Side::Lower) {
            Ok(llt) => llt.solve(&grad),
            Err(_) => {
                let mut ridge = hess.clone();
                let scale = (0..=s).map(|a| hess[(a, a)]).fold(0.0, f64::max).max(1.0);
                for a in 0..=s {
                    ridge[(a, a)] += 1e-8 * scale;
                }
                ridge
                    .llt(Side::Lower)
                    .map_err(|_| Error::Numerical("refit Hessian is not positive definite".into()))?
                    .solve(&grad)
            }
        };
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-10 {
            let mut cand: Vec<f64> = (0..=s).map(|a| beta[a] + t * step[a]).collect();
            let mut hit = false;
            for c in cand.iter_mut().skip(1) {
                if c.abs() > REFIT_CAP {
                    *c = c.clamp(-REFIT_CAP, REFIT_CAP);
                    hit = true;
                }
            }
            let e = eta_of(&cand);
            let l = problem.loglik(&e);
            if l >= ll - 1e-12 * ll.abs().max(1.0) {
                let delta = cand.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                capped |= hit;
                beta = cand;
                eta = e;
                ll = l;
                accepted = true;
                if delta < 1e-13 {
                    converged = true;
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted || converged {
            break;
        }
    }

    let mut std_coefficients = vec![0.0; k_all];
    let mut coefficients = vec![0.0; k_all];
    let mut intercept = beta[0];
    for (j, &k) in kept.iter().enumerate() {
        let sc = design.scales[k];
        std_coefficients[k] = beta[j + 1];
        coefficients[k] = beta[j + 1] / sc.scale;
        intercept -= coefficients[k] * sc.center;
    }
    let fit = FitResult {
        intercept,
        coefficients,
        std_intercept: beta[0],
        std_coefficients,
        lambda: 0.0,
        converged: converged && !capped,
        iterations,
        loglik: ll,
        df: s,
        kkt: last_gmax / problem.n_hat(),
    };
    Ok(RefitResult { fit, dropped, capped })
}
