//! Coefficient-surface RMSPE and global/local true-positive rates.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::select::{beta_hat_surface, local_active_set, Method, SelectionResult};
use crate::simulate::{true_beta, ACTIVE_PREDICTORS};
use crate::solver::FitResult;
use crate::wavelet::HaarBasis;

/// True coefficient surfaces `β_p(t)` on the unit square, `p` 0-based.
pub trait Surfaces: Sync {
    fn n_predictors(&self) -> usize;
    fn beta(&self, p: usize, t: [f64; 2]) -> f64;

    /// Predictors whose surface is not identically zero.
    fn support(&self) -> BTreeSet<usize>;
}

/// The simulation truth: the first ten predictors carry `β₁…β₁₀`, the rest
/// are noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioTruth {
    pub n_predictors: usize,
}

impl Surfaces for ScenarioTruth {
    fn n_predictors(&self) -> usize {
        self.n_predictors
    }

    fn beta(&self, p: usize, t: [f64; 2]) -> f64 {
        if p < ACTIVE_PREDICTORS {
            true_beta(p + 1, t).unwrap_or(0.0)
        } else {
            0.0
        }
    }

    fn support(&self) -> BTreeSet<usize> {
        (0..ACTIVE_PREDICTORS.min(self.n_predictors)).collect()
    }
}

/// Surfaces given by a closure, for hand-built instances.
pub struct FnSurfaces<F> {
    pub n_predictors: usize,
    pub support: BTreeSet<usize>,
    pub f: F,
}

impl<F: Fn(usize, [f64; 2]) -> f64 + Sync> Surfaces for FnSurfaces<F> {
    fn n_predictors(&self) -> usize {
        self.n_predictors
    }

    fn beta(&self, p: usize, t: [f64; 2]) -> f64 {
        (self.f)(p, t)
    }

    fn support(&self) -> BTreeSet<usize> {
        self.support.clone()
    }
}

/// `|selected ∩ truth| / |truth|`.
pub fn tpr_global(selected: &BTreeSet<usize>, truth: &BTreeSet<usize>) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::InvalidArgument("TPR needs a nonempty truth set".into()));
    }
    Ok(selected.intersection(truth).count() as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalTpr {
    pub value: f64,
    /// Points with no active predictor in truth, left out of the mean.
    pub skipped: usize,
}

/// Mean over points of `|𝒥(s) ∩ 𝒥̂(s)| / |𝒥(s)|`; points are unit-square
/// coordinates.
pub fn tpr_local<S: Surfaces + ?Sized>(fit: &FitResult, basis: &HaarBasis, points: &[[f64; 2]], truth: &S) -> Result<LocalTpr> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("local TPR needs at least one point".into()));
    }
    let mut total = 0.0;
    let mut used = 0usize;
    for &t in points {
        let actual: BTreeSet<usize> = (0..truth.n_predictors()).filter(|&p| truth.beta(p, t) != 0.0).collect();
        if actual.is_empty() {
            continue;
        }
        let est = local_active_set(fit, basis, t);
        total += est.intersection(&actual).count() as f64 / actual.len() as f64;
        used += 1;
    }
    if used == 0 {
        return Err(Error::InvalidArgument("every point has an empty truth set".into()));
    }
    Ok(LocalTpr {
        value: total / used as f64,
        skipped: points.len() - used,
    })
}

/// Root mean square error of `β̂_p − β_p` over all predictors and the cell
/// centres of a `G × G` grid. A `None` basis means constant surfaces `β̂_p = w_p`.
pub fn rmspe_beta<S: Surfaces + ?Sized>(fit: &FitResult, basis: Option<&HaarBasis>, truth: &S, grid: usize) -> Result<f64> {
    if grid < 2 {
        return Err(Error::InvalidArgument(format!("RMSPE grid must be at least 2 (got {grid})")));
    }
    let r = basis.map_or(1, HaarBasis::len);
    let p_n = truth.n_predictors();
    if fit.coefficients.len() != p_n * r {
        return Err(Error::Dimension(format!(
            "{} coefficients for {p_n} predictors with {r} atoms each",
            fit.coefficients.len()
        )));
    }
    let mut sum = 0.0;
    for iy in 0..grid {
        for ix in 0..grid {
            let t = [(ix as f64 + 0.5) / grid as f64, (iy as f64 + 0.5) / grid as f64];
            for p in 0..p_n {
                let est = match basis {
                    Some(b) => beta_hat_surface(fit, b, p, t),
                    None => fit.coefficients[p],
                };
                let d = est - truth.beta(p, t);
                sum += d * d;
            }
        }
    }
    Ok((sum / (grid * grid * p_n) as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub scenario: String,
    pub mu_target: f64,
    pub method: Method,
    pub replicate: usize,
    pub seed: u64,
    pub n_events: usize,
    pub rmspe: f64,
    pub tpr_global: f64,
    /// Absent for global methods.
    pub tpr_local: Option<f64>,
    pub runtime_s: f64,
    pub n_selected: usize,
    pub false_positives: usize,
    pub local_skipped: usize,
}

/// Scores a selection against the truth. `points` are the pattern's points in
/// unit coordinates.
pub fn evaluate<S: Surfaces + ?Sized>(
    result: &SelectionResult,
    truth: &S,
    points: &[[f64; 2]],
    grid: usize,
    scenario: &str,
    mu_target: f64,
    replicate: usize,
    seed: u64,
) -> Result<EvaluationReport> {
    let basis = result.basis()?;
    let selected: BTreeSet<usize> = result.global_active.iter().copied().collect();
    let support = truth.support();
    let tpr_g = tpr_global(&selected, &support)?;
    let (tpr_l, skipped) = match &basis {
        Some(b) if !points.is_empty() => {
            let l = tpr_local(&result.path_fit, b, points, truth)?;
            (Some(l.value), l.skipped)
        }
        Some(_) => (Some(0.0), 0),
        None => (None, 0),
    };
    let rmspe = rmspe_beta(&result.refit, basis.as_ref(), truth, grid)?;
    Ok(EvaluationReport {
        scenario: scenario.to_string(),
        mu_target,
        method: result.method,
        replicate,
        seed,
        n_events: result.n_events,
        rmspe,
        tpr_global: tpr_g,
        tpr_local: tpr_l,
        runtime_s: result.runtime_s,
        n_selected: selected.len(),
        false_positives: selected.difference(&support).count(),
        local_skipped: skipped,
    })
}
