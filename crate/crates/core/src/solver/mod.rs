//! Penalized Poisson GLM fitting on quadrature schemes.
//!
//! The objective on the standardized scale is
//!
//! ```text
//! Q(b, w) = (1/n̂) ℓ_BT(b, w) − Σ_k pen_λ(w_k)
//! ```
//!
//! with `n̂` the observed event count. Paths are fit by IRLS outer loops with
//! cyclic coordinate descent inside, warm-started down a log-spaced λ grid.

mod engine;
mod penalty;
mod refit;

use serde::{Deserialize, Serialize};

pub use engine::{fit_at, fit_path, kkt_violation, lambda_max, Problem};
pub use penalty::{firm_threshold, scad_derivative, scad_penalty, scad_univariate, soft_threshold, PenaltyKind, PenaltySpec};
pub use refit::{fit_unpenalized, RefitResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_outer: usize,
    pub max_sweeps: usize,
    /// Inner convergence: largest curvature-scaled coefficient change
    /// `h_k |Δw_k|` in a sweep.
    pub inner_tol: f64,
    /// Outer convergence: largest KKT violation on the standardized scale.
    pub kkt_tol: f64,
    /// Active-set cycles between full sweeps.
    pub full_sweep_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_outer: 100,
            max_sweeps: 20_000,
            inner_tol: 1e-8,
            kkt_tol: 1e-7,
            full_sweep_every: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathSpec {
    pub length: usize,
    /// `λ_min / λ_max`.
    pub ratio: f64,
    /// Stop the path once the fit saturates (deviance ratio above 0.999 or
    /// relative change below 1e-5), as path solvers commonly do.
    pub early_stop: bool,
}

impl Default for PathSpec {
    fn default() -> Self {
        Self {
            length: 100,
            ratio: 1e-4,
            early_stop: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Intercept in original units (`−∞` for a pattern with no events,
    /// written as `null` in JSON).
    #[serde(with = "extended_f64")]
    pub intercept: f64,
    /// Coefficients in original units, one per design column.
    pub coefficients: Vec<f64>,
    /// Intercept and coefficients on the standardized scale.
    #[serde(with = "extended_f64")]
    pub std_intercept: f64,
    pub std_coefficients: Vec<f64>,
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
    #[serde(with = "extended_f64")]
    pub loglik: f64,
    pub df: usize,
    /// Largest KKT violation at the returned solution (standardized scale).
    pub kkt: f64,
}

impl FitResult {
    pub fn support(&self) -> Vec<usize> {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(k, _)| k)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPath {
    pub lambdas: Vec<f64>,
    pub fits: Vec<FitResult>,
    pub spec: PathSpec,
    pub penalty: PenaltySpec,
    pub lambda_max: f64,
    /// Set when the path was cut short by a numerical failure.
    pub error: Option<String>,
}

impl FitPath {
    pub fn len(&self) -> usize {
        self.fits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fits.is_empty()
    }
}

/// `f64` fields that may be `−∞`: serialized as `null`.
pub(crate) mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }

    /// Vectors: `−∞` maps to `null` and back, `+∞` and NaN map to `"inf"`.
    pub mod vec {
        use serde::ser::SerializeSeq;
        use serde::{Deserialize, Deserializer, Serializer};

        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Entry {
            Num(f64),
            Null(()),
            Tag(serde::de::IgnoredAny),
        }

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                if x.is_finite() {
                    seq.serialize_element(x)?;
                } else if *x == f64::NEG_INFINITY {
                    seq.serialize_element(&None::<f64>)?;
                } else {
                    seq.serialize_element("inf")?;
                }
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            let raw = Vec::<Entry>::deserialize(d)?;
            Ok(raw
                .into_iter()
                .map(|e| match e {
                    Entry::Num(x) => x,
                    Entry::Tag(_) => f64::INFINITY,
                    Entry::Null(()) => f64::NEG_INFINITY,
                })
                .collect())
        }
    }
}
