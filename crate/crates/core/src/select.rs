//! Tuning-parameter selection by WQBIC, active sets, prediction and the
//! end-to-end selection methods.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::design::{build_design, build_global_design, covariates_at_nodes, LocalizedDesign};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::quadrature::{build_quadrature, dummy_grid_side, ETA_LIMIT};
use crate::solver::{fit_path, fit_unpenalized, FitPath, FitResult, PathSpec, PenaltyKind, PenaltySpec, Problem, SolverConfig};
use crate::spatial::{GridImage, PointPattern, Window};
use crate::wavelet::HaarBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Localized L1.
    #[serde(rename = "LLI")]
    Lli,
    /// Localized SCAD.
    #[serde(rename = "LLS")]
    Lls,
    #[serde(rename = "LASSO")]
    Lasso,
    #[serde(rename = "SCAD")]
    Scad,
    /// Adaptive L1.
    #[serde(rename = "AL")]
    Al,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Lli, Method::Lls, Method::Lasso, Method::Scad, Method::Al];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Lli => "LLI",
            Method::Lls => "LLS",
            Method::Lasso => "LASSO",
            Method::Scad => "SCAD",
            Method::Al => "AL",
        }
    }

    pub fn is_localized(self) -> bool {
        matches!(self, Method::Lli | Method::Lls)
    }

    pub fn penalty(self) -> PenaltyKind {
        match self {
            Method::Lli | Method::Lasso => PenaltyKind::L1,
            Method::Lls | Method::Scad => PenaltyKind::Scad,
            Method::Al => PenaltyKind::AdaptiveL1,
        }
    }

    pub fn valid_names() -> String {
        Method::ALL.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == up)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{s}'; valid methods: {}", Method::valid_names())))
    }
}

/// Effective sample size plugged into WQBIC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuPlugin {
    #[default]
    ObservedCount,
    WindowArea,
}

impl MuPlugin {
    pub fn value(self, n_events: usize, window: &Window) -> f64 {
        match self {
            MuPlugin::ObservedCount => n_events as f64,
            MuPlugin::WindowArea => window.area(),
        }
    }
}

/// `−(2/μ) ℓ + K₀ log μ` for every path point, and the minimizing index.
/// Ties go to the larger λ, i.e. the earlier path point.
pub fn wqbic(path: &FitPath, mu_hat: f64) -> Result<(Vec<f64>, usize)> {
    if !(mu_hat > 0.0) {
        return Err(Error::InvalidArgument(format!("WQBIC needs μ > 0 (got {mu_hat})")));
    }
    if path.is_empty() {
        return Err(Error::InvalidArgument("WQBIC on an empty path".into()));
    }
    let scores: Vec<f64> = path
        .fits
        .iter()
        .map(|f| -2.0 / mu_hat * f.loglik + f.df as f64 * mu_hat.ln())
        .collect();
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if !s.is_finite() {
            continue;
        }
        if best.is_none_or(|b| *s < scores[b]) {
            best = Some(i);
        }
    }
    let best = best.ok_or_else(|| Error::Numerical("every path point diverged".into()))?;
    Ok((scores, best))
}

/// Predictors with at least one nonzero coefficient (0-based).
pub fn global_active_set(fit: &FitResult, n_predictors: usize, n_atoms: usize) -> BTreeSet<usize> {
    (0..n_predictors)
        .filter(|&p| fit.coefficients[p * n_atoms..(p + 1) * n_atoms].iter().any(|w| *w != 0.0))
        .collect()
}

/// Predictors active at unit-square point `t`: some atom is nonzero at `t`
/// and carries a nonzero coefficient.
pub fn local_active_set(fit: &FitResult, basis: &HaarBasis, t: [f64; 2]) -> BTreeSet<usize> {
    let r = basis.len();
    let p_count = fit.coefficients.len() / r;
    let mut nonzero_atoms = Vec::with_capacity(basis.j_max() as usize + 2);
    basis.for_each_nonzero(t, |a, _| nonzero_atoms.push(a));
    (0..p_count)
        .filter(|&p| nonzero_atoms.iter().any(|&a| fit.coefficients[p * r + a] != 0.0))
        .collect()
}

/// `β̂_p(t) = Σ_r w_{pR+r} Ψ̃_r(t)` in original units.
pub fn beta_hat_surface(fit: &FitResult, basis: &HaarBasis, p: usize, t: [f64; 2]) -> f64 {
    let r = basis.len();
    let coeffs = &fit.coefficients[p * r..(p + 1) * r];
    let mut v = 0.0;
    basis.for_each_nonzero(t, |a, psi| v += coeffs[a] * psi);
    v
}

/// `exp{b₀ + Σ_p X_p(s) β̂_p(t)}`, with `t` the unit-square image of `s`.
/// A `None` basis means a global fit with one coefficient per covariate.
pub fn predict_intensity(fit: &FitResult, covariates: &[f64], basis: Option<&HaarBasis>, t: [f64; 2]) -> Result<f64> {
    let r = basis.map_or(1, HaarBasis::len);
    if covariates.len() * r != fit.coefficients.len() {
        return Err(Error::Dimension(format!(
            "{} covariates for {} coefficients with {r} atoms each",
            covariates.len(),
            fit.coefficients.len()
        )));
    }
    let mut eta = fit.intercept;
    for (p, &x) in covariates.iter().enumerate() {
        let beta = match basis {
            Some(b) => beta_hat_surface(fit, b, p, t),
            None => fit.coefficients[p],
        };
        if beta != 0.0 {
            eta += x * beta;
        }
    }
    if eta > ETA_LIMIT {
        return Err(Error::Overflow {
            value: eta,
            limit: ETA_LIMIT,
        });
    }
    Ok(eta.exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodConfig {
    pub method: Method,
    /// Finest resolution `J` of the dictionary.
    pub j: u32,
    pub j0: u32,
    /// Target number of dummy nodes, rounded up to a square grid.
    pub dummies: usize,
    pub scad_shape: f64,
    pub adaptive_exponent: f64,
    pub path: PathSpec,
    pub solver: SolverConfig,
    pub mu_plugin: MuPlugin,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            method: Method::Lli,
            j: 2,
            j0: 0,
            dummies: 256,
            scad_shape: 3.7,
            adaptive_exponent: 1.0,
            path: PathSpec::default(),
            solver: SolverConfig::default(),
            mu_plugin: MuPlugin::default(),
            exec: Execution::default(),
        }
    }
}

impl MethodConfig {
    pub fn new(method: Method) -> Self {
        Self { method, ..Self::default() }
    }

    pub fn penalty(&self) -> PenaltySpec {
        PenaltySpec {
            scad_shape: self.scad_shape,
            adaptive_exponent: self.adaptive_exponent,
            ..PenaltySpec::new(self.method.penalty())
        }
    }

    pub fn basis(&self) -> Result<Option<HaarBasis>> {
        if self.method.is_localized() {
            Ok(Some(HaarBasis::new(self.j0, self.j)?))
        } else {
            Ok(None)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: Method,
    pub lambda_star: f64,
    pub lambdas: Vec<f64>,
    /// Non-finite where the log-likelihood is.
    #[serde(with = "crate::solver::extended_f64::vec")]
    pub wqbic: Vec<f64>,
    /// Nonzero penalized coefficients at each path point.
    pub path_df: Vec<usize>,
    #[serde(with = "crate::solver::extended_f64::vec")]
    pub path_loglik: Vec<f64>,
    pub path_converged: Vec<bool>,
    pub chosen_index: usize,
    pub mu_hat: f64,
    /// Selected predictors (0-based).
    pub global_active: Vec<usize>,
    /// Selected design columns (0-based, `p·R + r`).
    pub coef_active: Vec<usize>,
    /// Path solution at `λ*`.
    pub path_fit: FitResult,
    pub refit: FitResult,
    /// Selected columns removed from the refit as collinear.
    pub refit_dropped: Vec<usize>,
    pub refit_capped: bool,
    pub n_predictors: usize,
    /// Atoms per predictor (1 for global methods).
    pub n_atoms: usize,
    pub j: Option<u32>,
    pub j0: Option<u32>,
    pub names: Vec<String>,
    pub window: Window,
    pub n_events: usize,
    pub n_nodes: usize,
    /// Path points that stopped before the KKT tolerance was met.
    pub non_converged: usize,
    /// Largest KKT violation among converged path points.
    pub max_kkt: f64,
    pub path_error: Option<String>,
    pub runtime_s: f64,
}

impl SelectionResult {
    pub fn basis(&self) -> Result<Option<HaarBasis>> {
        match (self.j0, self.j) {
            (Some(j0), Some(j)) => Ok(Some(HaarBasis::new(j0, j)?)),
            _ => Ok(None),
        }
    }

    pub fn is_localized(&self) -> bool {
        self.j.is_some()
    }
}

/// Quadrature, design, penalized path, WQBIC choice and unpenalized refit.
pub fn run_method(pattern: &PointPattern, images: &[GridImage], names: &[String], config: &MethodConfig) -> Result<SelectionResult> {
    run_method_with_path(pattern, images, names, config).map(|(sel, _)| sel)
}

/// As [`run_method`], also returning the whole path (absent when there are
/// no events).
pub fn run_method_with_path(
    pattern: &PointPattern,
    images: &[GridImage],
    names: &[String],
    config: &MethodConfig,
) -> Result<(SelectionResult, Option<FitPath>)> {
    let start = Instant::now();
    let window = pattern.window;
    let q = dummy_grid_side(config.dummies);
    let scheme = build_quadrature(pattern, &window, (q, q))?;
    let table = covariates_at_nodes(images, names, &scheme)?;
    let basis = config.basis()?;
    let design: LocalizedDesign = match &basis {
        Some(b) => build_design(&table, b, &scheme, config.exec)?,
        None => build_global_design(&table, &scheme)?,
    };
    let n_predictors = design.n_predictors;
    let n_atoms = design.n_atoms;
    let (j, j0) = match &basis {
        Some(b) => (Some(b.j_max()), Some(b.j0())),
        None => (None, None),
    };

    if scheme.n_data == 0 {
        let empty = FitResult {
            intercept: f64::NEG_INFINITY,
            coefficients: vec![0.0; design.n_cols()],
            std_intercept: f64::NEG_INFINITY,
            std_coefficients: vec![0.0; design.n_cols()],
            lambda: 0.0,
            converged: true,
            iterations: 0,
            loglik: 0.0,
            df: 0,
            kkt: 0.0,
        };
        return Ok((
            SelectionResult {
                method: config.method,
                lambda_star: 0.0,
                lambdas: Vec::new(),
                wqbic: Vec::new(),
                path_df: Vec::new(),
                path_loglik: Vec::new(),
                path_converged: Vec::new(),
                chosen_index: 0,
                mu_hat: config.mu_plugin.value(0, &window),
                global_active: Vec::new(),
                coef_active: Vec::new(),
                path_fit: empty.clone(),
                refit: empty,
                refit_dropped: Vec::new(),
                refit_capped: false,
                n_predictors,
                n_atoms,
                j,
                j0,
                names: names.to_vec(),
                window,
                n_events: 0,
                n_nodes: scheme.len(),
                non_converged: 0,
                max_kkt: 0.0,
                path_error: None,
                runtime_s: start.elapsed().as_secs_f64(),
            },
            None,
        ));
    }

    let problem = Problem::new(&design, &scheme)?;
    let path = fit_path(&problem, &config.penalty(), &config.path, &config.solver)?;
    log::debug!("{}: path of {} in {:.2}s", config.method, path.len(), start.elapsed().as_secs_f64());
    if path.is_empty() {
        return Err(Error::Numerical(path.error.unwrap_or_else(|| "empty path".into())));
    }
    let mu_hat = config.mu_plugin.value(scheme.n_data, &window);
    let (scores, chosen) = wqbic(&path, mu_hat)?;
    let path_fit = path.fits[chosen].clone();
    let coef_active = path_fit.support();
    let global_active: Vec<usize> = global_active_set(&path_fit, n_predictors, n_atoms).into_iter().collect();
    let refit = fit_unpenalized(&problem, &coef_active, &config.solver)?;
    log::debug!(
        "{}: refit on {} columns, {} iterations, at {:.2}s",
        config.method,
        coef_active.len(),
        refit.fit.iterations,
        start.elapsed().as_secs_f64()
    );
    let non_converged = path.fits.iter().filter(|f| !f.converged).count();
    let max_kkt = path.fits.iter().filter(|f| f.converged).map(|f| f.kkt).fold(0.0, f64::max);
    let sel = SelectionResult {
        method: config.method,
        lambda_star: path.lambdas[chosen],
        lambdas: path.lambdas.clone(),
        wqbic: scores,
        path_df: path.fits.iter().map(|f| f.df).collect(),
        path_loglik: path.fits.iter().map(|f| f.loglik).collect(),
        path_converged: path.fits.iter().map(|f| f.converged).collect(),
        chosen_index: chosen,
        mu_hat,
        global_active,
        coef_active,
        path_fit,
        refit: refit.fit,
        refit_dropped: refit.dropped,
        refit_capped: refit.capped,
        n_predictors,
        n_atoms,
        j,
        j0,
        names: names.to_vec(),
        window,
        n_events: scheme.n_data,
        n_nodes: scheme.len(),
        non_converged,
        max_kkt,
        path_error: path.error.clone(),
        runtime_s: start.elapsed().as_secs_f64(),
    };
    Ok((sel, Some(path)))
}
