use std::collections::HashMap;

use super::{FitPath, FitResult, PathSpec, PenaltyKind, PenaltySpec, SolverConfig};
use crate::design::LocalizedDesign;
use faer::linalg::solvers::Solve;
use faer::{Col, Mat, Side};

use crate::error::{Error, Result};
use crate::quadrature::{loglik_from_eta, QuadratureScheme, ETA_LIMIT};

/// A penalized fitting problem: a design on a quadrature scheme.
///
/// Standardization is applied implicitly: coefficient `w_k` multiplies
/// `(z_k − c_k) / s_k`, so only the nonzero rows of `z_k` are touched when a
/// coordinate moves and the centring is carried as a scalar shift.
pub struct Problem<'a> {
    pub design: &'a LocalizedDesign,
    pub scheme: &'a QuadratureScheme,
    pub(crate) y: Vec<f64>,
    n_hat: f64,
    eligible: Vec<usize>,
}

#[derive(Clone)]
struct State {
    w: Vec<f64>,
    b: f64,
    eta: Vec<f64>,
}

impl<'a> Problem<'a> {
    pub fn new(design: &'a LocalizedDesign, scheme: &'a QuadratureScheme) -> Result<Self> {
        if design.n_rows() != scheme.len() {
            return Err(Error::Dimension(format!(
                "design has {} rows for {} quadrature nodes",
                design.n_rows(),
                scheme.len()
            )));
        }
        if scheme.n_data == 0 {
            return Err(Error::InvalidArgument("penalized fit needs at least one event".into()));
        }
        let eligible = (0..design.n_cols()).filter(|&k| !design.scales[k].constant).collect();
        Ok(Self {
            design,
            scheme,
            y: scheme.responses(),
            n_hat: scheme.n_data as f64,
            eligible,
        })
    }

    pub fn n_hat(&self) -> f64 {
        self.n_hat
    }

    /// Columns that take part in the penalized fit.
    pub fn eligible(&self) -> &[usize] {
        &self.eligible
    }

    fn k(&self) -> usize {
        self.design.n_cols()
    }

    pub(crate) fn column(&self, k: usize) -> &[f64] {
        self.design.z.column(k).to_slice().expect("design is column-major")
    }

    pub(crate) fn null_intercept(&self) -> f64 {
        (self.n_hat / self.scheme.window.area()).ln()
    }

    fn null_state(&self) -> State {
        let b = self.null_intercept();
        State {
            w: vec![0.0; self.k()],
            b,
            eta: vec![b; self.scheme.len()],
        }
    }

    /// Original-scale intercept and coefficients.
    fn unstandardize(&self, w: &[f64], b: f64) -> (f64, Vec<f64>) {
        let mut b0 = b;
        let mut orig = vec![0.0; w.len()];
        for &k in &self.eligible {
            if w[k] != 0.0 {
                let s = self.design.scales[k];
                orig[k] = w[k] / s.scale;
                b0 -= orig[k] * s.center;
            }
        }
        (b0, orig)
    }

    fn eta_of(&self, w: &[f64], b: f64) -> Vec<f64> {
        let (b0, orig) = self.unstandardize(w, b);
        let mut eta = vec![b0; self.scheme.len()];
        for &k in &self.eligible {
            let wk = orig[k];
            if wk != 0.0 {
                let z = self.column(k);
                for &m in &self.design.nonzero[k] {
                    let m = m as usize;
                    eta[m] += wk * z[m];
                }
            }
        }
        eta
    }

    fn state_from_fit(&self, fit: &FitResult) -> State {
        let mut w = fit.std_coefficients.clone();
        for (k, v) in w.iter_mut().enumerate() {
            if self.design.scales[k].constant {
                *v = 0.0;
            }
        }
        let eta = self.eta_of(&w, fit.std_intercept);
        State {
            w,
            b: fit.std_intercept,
            eta,
        }
    }

    pub(crate) fn loglik(&self, eta: &[f64]) -> f64 {
        if eta.iter().any(|e| !(*e <= ETA_LIMIT)) {
            return f64::NEG_INFINITY;
        }
        loglik_from_eta(eta, self.scheme)
    }

    fn penalty_sum(&self, pen: &PenaltySpec, lambda: f64, weights: &[f64], w: &[f64]) -> f64 {
        self.eligible.iter().map(|&k| pen.value(w[k], lambda, weights[k])).sum()
    }

    fn objective(&self, pen: &PenaltySpec, lambda: f64, weights: &[f64], w: &[f64], eta: &[f64]) -> f64 {
        self.loglik(eta) / self.n_hat - self.penalty_sum(pen, lambda, weights, w)
    }

    /// Gradient of `ℓ / n̂` on the standardized scale: `(intercept, per column)`.
    fn gradient(&self, eta: &[f64]) -> (f64, Vec<f64>) {
        let resid: Vec<f64> = eta
            .iter()
            .zip(&self.scheme.weights)
            .zip(&self.y)
            .map(|((&e, &w), &y)| y - w * e.exp())
            .collect();
        let total: f64 = resid.iter().sum();
        let mut g = vec![0.0; self.k()];
        for &k in &self.eligible {
            let z = self.column(k);
            let s = self.design.scales[k];
            let dot: f64 = self.design.nonzero[k].iter().map(|&m| resid[m as usize] * z[m as usize]).sum();
            g[k] = (dot - s.center * total) / (s.scale * self.n_hat);
        }
        (total / self.n_hat, g)
    }

    fn kkt(&self, pen: &PenaltySpec, lambda: f64, weights: &[f64], w: &[f64], eta: &[f64]) -> f64 {
        let (g0, g) = self.gradient(eta);
        let mut worst = g0.abs();
        for &k in &self.eligible {
            worst = worst.max(pen.kkt_violation(w[k], g[k], lambda, weights[k]));
        }
        worst
    }

    pub(crate) fn penalty_weights(&self, pen: &PenaltySpec) -> Result<Vec<f64>> {
        match (&pen.adaptive_weights, pen.kind) {
            (Some(v), PenaltyKind::AdaptiveL1 | PenaltyKind::L1 | PenaltyKind::Ridge) => {
                if v.len() != self.k() {
                    return Err(Error::Dimension(format!("{} adaptive weights for {} columns", v.len(), self.k())));
                }
                Ok(v.clone())
            }
            _ => Ok(vec![1.0; self.k()]),
        }
    }

    fn result(&self, state: &State, lambda: f64, converged: bool, iterations: usize, kkt: f64) -> FitResult {
        let (intercept, coefficients) = self.unstandardize(&state.w, state.b);
        let df = self.eligible.iter().filter(|&&k| state.w[k] != 0.0).count();
        FitResult {
            intercept,
            coefficients,
            std_intercept: state.b,
            std_coefficients: state.w.clone(),
            lambda,
            converged,
            iterations,
            loglik: self.loglik(&state.eta),
            df,
            kkt,
        }
    }

    /// IRLS outer loop with coordinate descent on each quadratic model.
    /// Returns `(converged, outer iterations, final KKT violation)`.
    fn solve(&self, pen: &PenaltySpec, lambda: f64, weights: &[f64], state: &mut State, cfg: &SolverConfig) -> Result<(bool, usize, f64)> {
        let mut f_old = self.objective(pen, lambda, weights, &state.w, &state.eta);
        if !f_old.is_finite() {
            return Err(Error::Numerical("objective is not finite at the starting point".into()));
        }
        let mut kkt = self.kkt(pen, lambda, weights, &state.w, &state.eta);
        if kkt <= cfg.kkt_tol {
            return Ok((true, 0, kkt));
        }
        let inner_tol = cfg.inner_tol.min(0.1 * cfg.kkt_tol);

        for outer in 1..=cfg.max_outer {
            let mut model = QuadModel::new(self, pen, lambda, weights, state);
            let mut sweeps = 0usize;
            'inner: loop {
                let d = model.sweep(&self.eligible);
                sweeps += 1;
                if d < inner_tol || sweeps >= cfg.max_sweeps {
                    break;
                }
                let active: Vec<usize> = self.eligible.iter().copied().filter(|&k| model.w[k] != 0.0).collect();
                if !active.is_empty() && active.len() <= NEWTON_MAX_ACTIVE {
                    model.newton(&active);
                }
                for _ in 1..cfg.full_sweep_every.max(1) {
                    let d = model.sweep(&active);
                    sweeps += 1;
                    if d < inner_tol {
                        break;
                    }
                    if sweeps >= cfg.max_sweeps {
                        break 'inner;
                    }
                }
            }
            log::trace!("outer {outer}: {sweeps} sweeps");
            let (w, b) = (model.w, model.b);

            // backtracking keeps the penalized objective non-decreasing
            let eta_new = self.eta_of(&w, b);
            let mut step = 1.0;
            let accepted = loop {
                let (wc, bc, etac) = if step == 1.0 {
                    (w.clone(), b, eta_new.clone())
                } else {
                    let wc: Vec<f64> = state.w.iter().zip(&w).map(|(o, n)| o + step * (n - o)).collect();
                    let etac: Vec<f64> = state.eta.iter().zip(&eta_new).map(|(o, n)| o + step * (n - o)).collect();
                    (wc, state.b + step * (b - state.b), etac)
                };
                let f = self.objective(pen, lambda, weights, &wc, &etac);
                if f >= f_old - 1e-13 * f_old.abs().max(1.0) {
                    break Some((wc, bc, etac, f));
                }
                step *= 0.5;
                if step < 1e-10 {
                    break None;
                }
            };
            let Some((wc, bc, etac, f)) = accepted else {
                return Ok((false, outer, kkt));
            };
            let moved = wc.iter().zip(&state.w).any(|(a, b)| a != b) || bc != state.b;
            state.w = wc;
            state.b = bc;
            state.eta = etac;
            f_old = f;
            kkt = self.kkt(pen, lambda, weights, &state.w, &state.eta);
            if kkt <= cfg.kkt_tol {
                return Ok((true, outer, kkt));
            }
            if !moved {
                return Ok((false, outer, kkt));
            }
        }
        Ok((false, cfg.max_outer, kkt))
    }

    /// Null-model fit (intercept only).
    fn null_fit(&self, pen: &PenaltySpec, lambda: f64, weights: &[f64]) -> FitResult {
        let state = self.null_state();
        let kkt = self.kkt(pen, lambda, weights, &state.w, &state.eta);
        self.result(&state, lambda, true, 0, kkt)
    }

    /// Saturated and null log-likelihoods, for the deviance ratio.
    fn deviance_anchors(&self) -> (f64, f64) {
        let sat: f64 = self
            .scheme
            .weights
            .iter()
            .zip(&self.scheme.is_data)
            .filter(|(_, d)| **d)
            .map(|(w, _)| -w.ln() - 1.0)
            .sum();
        let null = self.loglik(&self.null_state().eta);
        (null, sat)
    }
}

/// Active sets larger than this are left to coordinate descent alone.
const NEWTON_MAX_ACTIVE: usize = 1000;

/// Quadratic model of `ℓ/n̂` at the current IRLS point, with the working
/// residual kept up to date under coordinate moves.
///
/// Rows hold `q_m = q_base_m − μ_m · shift`; `shift` collects the constant
/// part of every move (intercept and centring) so that only nonzero rows of a
/// column are touched.
struct QuadModel<'a, 'p> {
    problem: &'a Problem<'p>,
    pen: &'a PenaltySpec,
    lambda: f64,
    weights: &'a [f64],
    mu: Vec<f64>,
    sw: f64,
    swz: Vec<f64>,
    h: Vec<f64>,
    q: Vec<f64>,
    qsum: f64,
    shift: f64,
    w: Vec<f64>,
    b: f64,
    cached: Option<(Vec<usize>, Mat<f64>)>,
}

impl<'a, 'p> QuadModel<'a, 'p> {
    fn new(problem: &'a Problem<'p>, pen: &'a PenaltySpec, lambda: f64, weights: &'a [f64], state: &State) -> Self {
        let m_nodes = problem.scheme.len();
        let n = problem.n_hat;
        let mut mu = vec![0.0; m_nodes];
        let mut q = vec![0.0; m_nodes];
        for m in 0..m_nodes {
            mu[m] = problem.scheme.weights[m] * state.eta[m].exp();
            q[m] = problem.y[m] - mu[m];
        }
        let sw: f64 = mu.iter().sum();
        let qsum: f64 = q.iter().sum();
        let k_cols = problem.k();
        let mut swz = vec![0.0; k_cols];
        let mut h = vec![0.0; k_cols];
        for &k in &problem.eligible {
            let z = problem.column(k);
            let s = problem.design.scales[k];
            let (mut a1, mut a2) = (0.0, 0.0);
            for &m in &problem.design.nonzero[k] {
                let m = m as usize;
                let t = mu[m] * z[m];
                a1 += t;
                a2 += t * z[m];
            }
            swz[k] = a1;
            h[k] = (a2 - 2.0 * s.center * a1 + s.center * s.center * sw) / (s.scale * s.scale * n);
        }
        Self {
            problem,
            pen,
            lambda,
            weights,
            mu,
            sw,
            swz,
            h,
            q,
            qsum,
            shift: 0.0,
            w: state.w.clone(),
            b: state.b,
            cached: None,
        }
    }

    fn intercept_grad(&self) -> f64 {
        (self.qsum - self.shift * self.sw) / self.problem.n_hat
    }

    fn grad(&self, k: usize) -> f64 {
        let p = self.problem;
        let z = p.column(k);
        let s = p.design.scales[k];
        let mut dot = 0.0;
        for &m in &p.design.nonzero[k] {
            dot += self.q[m as usize] * z[m as usize];
        }
        dot -= self.shift * self.swz[k];
        let qall = self.qsum - self.shift * self.sw;
        (dot - s.center * qall) / (s.scale * p.n_hat)
    }

    fn apply(&mut self, k: usize, d: f64) {
        let p = self.problem;
        let z = p.column(k);
        let s = p.design.scales[k];
        self.w[k] += d;
        let ds = d / s.scale;
        for &m in &p.design.nonzero[k] {
            let m = m as usize;
            self.q[m] -= self.mu[m] * ds * z[m];
        }
        self.qsum -= ds * self.swz[k];
        self.shift -= ds * s.center;
    }

    fn apply_intercept(&mut self, d: f64) {
        self.b += d;
        self.shift += d;
    }

    /// One cyclic pass over `cols` and the intercept. Returns the largest
    /// curvature-scaled move.
    fn sweep(&mut self, cols: &[usize]) -> f64 {
        let mut max_delta = 0.0f64;
        for &k in cols {
            let hk = self.h[k];
            if !(hk > 1e-300) {
                continue;
            }
            let a = self.w[k] + self.grad(k) / hk;
            let new = self.pen.update(a, hk, self.lambda, self.weights[k]);
            let d = new - self.w[k];
            if d != 0.0 {
                self.apply(k, d);
                self.w[k] = new;
                max_delta = max_delta.max(hk * d.abs());
            }
        }
        let delta = self.intercept_grad() * self.problem.n_hat / self.sw;
        self.apply_intercept(delta);
        max_delta.max(self.sw / self.problem.n_hat * delta.abs())
    }

    /// Repeated Newton steps: a coordinate that reaches zero leaves the set
    /// and the reduced system is solved again.
    fn newton(&mut self, active: &[usize]) {
        let hess = self.hessian(active);
        self.cached = Some((active.to_vec(), hess.clone()));
        let mut live: Vec<usize> = (0..active.len()).collect();
        while !live.is_empty() {
            match self.newton_step(&hess, active, &live) {
                Some(Some(i)) => {
                    live.remove(i);
                }
                _ => break,
            }
        }
    }

    /// Curvature of the quadratic model over the intercept and `active`,
    /// reusing entries from the previous call.
    fn hessian(&self, active: &[usize]) -> Mat<f64> {
        let p = self.problem;
        let n = p.n_hat;
        let dim = active.len() + 1;
        let mut hess = Mat::<f64>::zeros(dim, dim);
        hess[(0, 0)] = self.sw / n;
        let old: HashMap<usize, usize> = match &self.cached {
            Some((cols, _)) => cols.iter().enumerate().map(|(i, &k)| (k, i + 1)).collect(),
            None => HashMap::new(),
        };
        let mut dense = vec![0.0; p.scheme.len()];
        for (i, &k) in active.iter().enumerate() {
            let sk = p.design.scales[k];
            hess[(0, i + 1)] = (self.swz[k] - sk.center * self.sw) / (sk.scale * n);
            hess[(i + 1, 0)] = hess[(0, i + 1)];
            let ok = old.get(&k).copied();
            let zk = p.column(k);
            for &m in &p.design.nonzero[k] {
                dense[m as usize] = self.mu[m as usize] * zk[m as usize];
            }
            for (j, &l) in active.iter().enumerate().take(i + 1) {
                if let (Some(a), Some(b)) = (ok, old.get(&l)) {
                    let v = self.cached.as_ref().map_or(0.0, |(_, h)| h[(a, *b)]);
                    hess[(i + 1, j + 1)] = v;
                    hess[(j + 1, i + 1)] = v;
                    continue;
                }
                let sl = p.design.scales[l];
                let zl = p.column(l);
                let mut cross = 0.0;
                for &m in &p.design.nonzero[l] {
                    cross += dense[m as usize] * zl[m as usize];
                }
                let v = (cross - sl.center * self.swz[k] - sk.center * self.swz[l] + sk.center * sl.center * self.sw)
                    / (sk.scale * sl.scale * n);
                hess[(i + 1, j + 1)] = v;
                hess[(j + 1, i + 1)] = v;
            }
            for &m in &p.design.nonzero[k] {
                dense[m as usize] = 0.0;
            }
        }
        hess
    }

    /// Newton step on the model restricted to the `live` entries of `active`
    /// and the intercept, with the penalty linearized in its current branch.
    /// The step stops at the first sign change and is kept only if the model
    /// objective improves. Returns `None` when rejected, else the position in
    /// `live` of the coordinate that stopped the step.
    fn newton_step(&mut self, full: &Mat<f64>, all: &[usize], live: &[usize]) -> Option<Option<usize>> {
        let active: Vec<usize> = live.iter().map(|&i| all[i]).collect();
        let active = &active[..];
        let dim = active.len() + 1;
        let pos = |i: usize| if i == 0 { 0 } else { live[i - 1] + 1 };
        let hess = Mat::<f64>::from_fn(dim, dim, |i, j| full[(pos(i), pos(j))]);
        let mut g = Col::<f64>::zeros(dim);
        g[0] = self.intercept_grad();
        for (i, &k) in active.iter().enumerate() {
            g[i + 1] = self.grad(k);
        }
        let mut system = hess.clone();
        let mut rhs = g.clone();
        for (i, &k) in active.iter().enumerate() {
            let (slope, curv) = self.pen.linearize(self.w[k], self.lambda, self.weights[k]);
            rhs[i + 1] -= slope;
            system[(i + 1, i + 1)] += curv;
        }
        let llt = system.llt(Side::Lower).ok()?;
        let step = llt.solve(&rhs);
        if (0..dim).any(|i| !step[i].is_finite()) {
            return None;
        }
        let mut t = 1.0f64;
        let mut hit = None;
        for (i, &k) in active.iter().enumerate() {
            let (w, d) = (self.w[k], step[i + 1]);
            if w != 0.0 && (w + d) * w < 0.0 {
                let tk = -w / d;
                if tk < t {
                    t = tk;
                    hit = Some(i);
                }
            }
        }
        let delta: Vec<f64> = (0..dim).map(|i| t * step[i]).collect();
        // model change: gᵀΔ − ½ ΔᵀHΔ − Δpenalty
        let mut gain = 0.0;
        for i in 0..dim {
            gain += g[i] * delta[i];
            let mut hd = 0.0;
            for j in 0..dim {
                hd += hess[(i, j)] * delta[j];
            }
            gain -= 0.5 * delta[i] * hd;
        }
        for (i, &k) in active.iter().enumerate() {
            let new = if hit == Some(i) { 0.0 } else { self.w[k] + delta[i + 1] };
            gain -= self.pen.value(new, self.lambda, self.weights[k]) - self.pen.value(self.w[k], self.lambda, self.weights[k]);
        }
        if !(gain > 0.0) {
            return None;
        }
        self.apply_intercept(delta[0]);
        for (i, &k) in active.iter().enumerate() {
            let d = if hit == Some(i) { -self.w[k] } else { delta[i + 1] };
            if d != 0.0 {
                self.apply(k, d);
                if hit == Some(i) {
                    self.w[k] = 0.0;
                }
            }
        }
        Some(hit)
    }
}

/// Smallest λ at which every penalized coefficient is zero:
/// `max_k |∇_k (ℓ/n̂)(null)| / v_k`.
pub fn lambda_max(problem: &Problem, pen: &PenaltySpec) -> Result<f64> {
    let weights = problem.penalty_weights(pen)?;
    let state = problem.null_state();
    let (_, g) = problem.gradient(&state.eta);
    let lmax = problem.eligible.iter().map(|&k| g[k].abs() / weights[k]).fold(0.0, f64::max);
    Ok(lmax)
}

/// KKT violation of `fit` under `pen` at `lambda`, recomputed from scratch.
pub fn kkt_violation(problem: &Problem, pen: &PenaltySpec, lambda: f64, fit: &FitResult) -> Result<f64> {
    let weights = problem.penalty_weights(pen)?;
    let state = problem.state_from_fit(fit);
    Ok(problem.kkt(pen, lambda, &weights, &state.w, &state.eta))
}

/// Fit at a single λ, optionally warm-started.
pub fn fit_at(problem: &Problem, pen: &PenaltySpec, lambda: f64, warm: Option<&FitResult>, cfg: &SolverConfig) -> Result<FitResult> {
    pen.validate()?;
    let pen = resolve_adaptive(problem, pen, cfg)?;
    let weights = problem.penalty_weights(&pen)?;
    let mut state = match warm {
        Some(f) => problem.state_from_fit(f),
        None => problem.null_state(),
    };
    let (converged, iters, kkt) = problem.solve(&pen, lambda, &weights, &mut state, cfg)?;
    Ok(problem.result(&state, lambda, converged, iters, kkt))
}

fn resolve_adaptive(problem: &Problem, pen: &PenaltySpec, cfg: &SolverConfig) -> Result<PenaltySpec> {
    if pen.kind != PenaltyKind::AdaptiveL1 || pen.adaptive_weights.is_some() {
        return Ok(pen.clone());
    }
    let pilot = ridge_pilot(problem, cfg)?;
    let weights: Vec<f64> = pilot
        .std_coefficients
        .iter()
        .map(|w| 1.0 / (w.abs().powf(pen.adaptive_exponent) + 1e-8))
        .collect();
    Ok(PenaltySpec {
        adaptive_weights: Some(weights),
        ..pen.clone()
    })
}

/// Ridge fit chosen by WQBIC (`μ̂ = n̂`) over a ten-point path spanning three
/// decades below the L1 `λ_max`.
fn ridge_pilot(problem: &Problem, cfg: &SolverConfig) -> Result<FitResult> {
    let ridge = PenaltySpec::new(PenaltyKind::Ridge);
    let top = lambda_max(problem, &PenaltySpec::l1())?.max(1e-8);
    let spec = PathSpec {
        length: 10,
        ratio: 1e-3,
        early_stop: false,
    };
    let path = run_path(problem, &ridge, &spec, cfg, top)?;
    let n = problem.n_hat();
    let best = path
        .fits
        .iter()
        .filter(|f| f.loglik.is_finite())
        .map(|f| (-2.0 / n * f.loglik + f.df as f64 * n.ln(), f))
        .fold(None::<(f64, &FitResult)>, |acc, (s, f)| match acc {
            Some((bs, _)) if bs <= s => acc,
            _ => Some((s, f)),
        })
        .ok_or_else(|| Error::Numerical("ridge pilot path diverged".into()))?;
    Ok(best.1.clone())
}

fn lambda_grid(top: f64, spec: &PathSpec) -> Vec<f64> {
    let len = spec.length.max(1);
    if len == 1 {
        return vec![top];
    }
    (0..len).map(|i| top * spec.ratio.powf(i as f64 / (len - 1) as f64)).collect()
}

fn run_path(problem: &Problem, pen: &PenaltySpec, spec: &PathSpec, cfg: &SolverConfig, top: f64) -> Result<FitPath> {
    let weights = problem.penalty_weights(pen)?;
    let grid = lambda_grid(top, spec);
    let zeroing = matches!(pen.kind, PenaltyKind::L1 | PenaltyKind::AdaptiveL1 | PenaltyKind::Scad);
    let (ll_null, ll_sat) = problem.deviance_anchors();
    let mut state = problem.null_state();
    let mut lambdas = Vec::with_capacity(grid.len());
    let mut fits: Vec<FitResult> = Vec::with_capacity(grid.len());
    let mut error = None;
    let mut prev_ratio = 0.0;
    for (i, &lambda) in grid.iter().enumerate() {
        let clock = std::time::Instant::now();
        let fit = if zeroing && i == 0 {
            problem.null_fit(pen, lambda, &weights)
        } else {
            match problem.solve(pen, lambda, &weights, &mut state, cfg) {
                Ok((converged, iters, kkt)) => problem.result(&state, lambda, converged, iters, kkt),
                Err(e) => {
                    error = Some(format!("path truncated at λ index {i}: {e}"));
                    break;
                }
            }
        };
        if !fit.loglik.is_finite() {
            error = Some(format!("path truncated at λ index {i}: log-likelihood diverged"));
            break;
        }
        log::debug!(
            "λ[{i}] = {lambda:.3e}: df {} outer {} kkt {:.1e} converged {} ({:.3}s)",
            fit.df,
            fit.iterations,
            fit.kkt,
            fit.converged,
            clock.elapsed().as_secs_f64()
        );
        let ratio = if ll_sat > ll_null {
            (fit.loglik - ll_null) / (ll_sat - ll_null)
        } else {
            0.0
        };
        lambdas.push(lambda);
        fits.push(fit);
        if spec.early_stop && i >= 5 && (ratio > 0.999 || ratio - prev_ratio < 1e-5 * ratio.abs()) {
            break;
        }
        prev_ratio = ratio;
    }
    Ok(FitPath {
        lambdas,
        fits,
        spec: *spec,
        penalty: pen.clone(),
        lambda_max: top,
        error,
    })
}

/// Penalized path from `λ_max` down to `λ_max · ratio`, warm-started.
///
/// Non-converged points are kept and flagged; a numerical failure truncates
/// the path and is recorded in [`FitPath::error`].
pub fn fit_path(problem: &Problem, pen: &PenaltySpec, spec: &PathSpec, cfg: &SolverConfig) -> Result<FitPath> {
    pen.validate()?;
    if spec.length == 0 || !(spec.ratio > 0.0 && spec.ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "path needs length ≥ 1 and 0 < ratio < 1 (got {}, {})",
            spec.length, spec.ratio
        )));
    }
    let pen = resolve_adaptive(problem, pen, cfg)?;
    let mut top = lambda_max(problem, &pen)?;
    if !(top > 0.0) {
        top = 1e-8;
    }
    if pen.kind == PenaltyKind::None {
        let mut state = problem.null_state();
        let weights = problem.penalty_weights(&pen)?;
        let (converged, iters, kkt) = problem.solve(&pen, 0.0, &weights, &mut state, cfg)?;
        let fit = problem.result(&state, 0.0, converged, iters, kkt);
        return Ok(FitPath {
            lambdas: vec![0.0],
            fits: vec![fit],
            spec: *spec,
            penalty: pen,
            lambda_max: top,
            error: None,
        });
    }
    run_path(problem, &pen, spec, cfg, top)
}
