use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `sign(z) · max(|z| − γ, 0)`.
#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// SCAD penalty `P_λ(θ; τ)`.
pub fn scad_penalty(theta: f64, lambda: f64, shape: f64) -> f64 {
    let t = theta.abs();
    if t <= lambda {
        lambda * t
    } else if t <= shape * lambda {
        -(t * t - 2.0 * shape * lambda * t + lambda * lambda) / (2.0 * (shape - 1.0))
    } else {
        (shape + 1.0) * lambda * lambda / 2.0
    }
}

/// Derivative of the SCAD penalty in `θ`; at `θ = 0` the right derivative `λ`.
pub fn scad_derivative(theta: f64, lambda: f64, shape: f64) -> f64 {
    let t = theta.abs();
    let sign = if theta < 0.0 { -1.0 } else { 1.0 };
    if t <= lambda {
        lambda * sign
    } else if t <= shape * lambda {
        (shape * lambda - t) * sign / (shape - 1.0)
    } else {
        0.0
    }
}

/// Closed-form SCAD coordinate solution for unit curvature:
/// `argmin_w ½(w − z)² + P_λ(w; τ)`.
pub fn firm_threshold(z: f64, lambda: f64, shape: f64) -> f64 {
    let a = z.abs();
    if a <= 2.0 * lambda {
        soft_threshold(z, lambda)
    } else if a <= shape * lambda {
        soft_threshold(z, shape * lambda / (shape - 1.0)) / (1.0 - 1.0 / (shape - 1.0))
    } else {
        z
    }
}

/// Exact maximizer of `−½ h (w − a)² − P_λ(|w|; τ)` for any curvature `h > 0`.
///
/// Each SCAD branch is either concave (clipped stationary point) or convex
/// (endpoints) in `w`, so comparing the branch candidates is exact. For
/// `h (τ − 1) > 1` this coincides with the firm-threshold rule.
pub fn scad_univariate(a: f64, h: f64, lambda: f64, shape: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    let sign = a.signum();
    let t = a.abs();
    let objective = |w: f64| -0.5 * h * (w - t) * (w - t) - scad_penalty(w, lambda, shape);
    let inner = shape * lambda;
    let mut candidates = [0.0f64; 6];
    candidates[0] = 0.0;
    candidates[1] = (soft_threshold(h * t, lambda) / h).clamp(0.0, lambda);
    candidates[2] = lambda;
    let curvature = h - 1.0 / (shape - 1.0);
    candidates[3] = if curvature.abs() > 1e-300 {
        ((h * t - inner / (shape - 1.0)) / curvature).clamp(lambda, inner)
    } else {
        inner
    };
    candidates[4] = inner;
    candidates[5] = t.max(inner);
    let mut best = 0.0;
    let mut best_val = objective(0.0);
    for &w in &candidates[1..] {
        let v = objective(w);
        if v > best_val {
            best_val = v;
            best = w;
        }
    }
    sign * best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    L1,
    Scad,
    AdaptiveL1,
    Ridge,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    #[serde(default = "default_shape")]
    pub scad_shape: f64,
    /// Per-column weights for the adaptive L1; computed from a ridge pilot
    /// when absent.
    #[serde(default)]
    pub adaptive_weights: Option<Vec<f64>>,
    #[serde(default = "default_exponent")]
    pub adaptive_exponent: f64,
}

fn default_shape() -> f64 {
    3.7
}

fn default_exponent() -> f64 {
    1.0
}

impl PenaltySpec {
    pub fn new(kind: PenaltyKind) -> Self {
        Self {
            kind,
            scad_shape: default_shape(),
            adaptive_weights: None,
            adaptive_exponent: default_exponent(),
        }
    }

    pub fn l1() -> Self {
        Self::new(PenaltyKind::L1)
    }

    pub fn scad() -> Self {
        Self::new(PenaltyKind::Scad)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == PenaltyKind::Scad && !(self.scad_shape > 2.0) {
            return Err(Error::InvalidArgument(format!(
                "SCAD shape must exceed 2 (got {})",
                self.scad_shape
            )));
        }
        if let Some(w) = &self.adaptive_weights {
            if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::InvalidArgument("adaptive weights must be finite and positive".into()));
            }
        }
        if !(self.adaptive_exponent > 0.0) {
            return Err(Error::InvalidArgument("adaptive exponent must be positive".into()));
        }
        Ok(())
    }

    /// Penalty contribution of one standardized coefficient.
    pub(crate) fn value(&self, w: f64, lambda: f64, weight: f64) -> f64 {
        match self.kind {
            PenaltyKind::L1 | PenaltyKind::AdaptiveL1 => lambda * weight * w.abs(),
            PenaltyKind::Scad => scad_penalty(w, lambda, self.scad_shape),
            PenaltyKind::Ridge => 0.5 * lambda * weight * w * w,
            PenaltyKind::None => 0.0,
        }
    }

    /// Maximizer of `−½ h (w − a)² − penalty(w)`.
    #[inline]
    pub(crate) fn update(&self, a: f64, h: f64, lambda: f64, weight: f64) -> f64 {
        match self.kind {
            PenaltyKind::L1 | PenaltyKind::AdaptiveL1 => soft_threshold(h * a, lambda * weight) / h,
            PenaltyKind::Scad => scad_univariate(a, h, lambda, self.scad_shape),
            PenaltyKind::Ridge => h * a / (h + lambda * weight),
            PenaltyKind::None => a,
        }
    }

    /// Penalty derivative near `w ≠ 0` in its current branch, as
    /// `(slope, curvature)`: `pen'(w + Δ) ≈ slope + curvature · Δ`.
    pub(crate) fn linearize(&self, w: f64, lambda: f64, weight: f64) -> (f64, f64) {
        let sign = w.signum();
        match self.kind {
            PenaltyKind::L1 | PenaltyKind::AdaptiveL1 => (lambda * weight * sign, 0.0),
            PenaltyKind::Scad => {
                let t = w.abs();
                let tau = self.scad_shape;
                if t <= lambda {
                    (lambda * sign, 0.0)
                } else if t <= tau * lambda {
                    ((tau * lambda * sign - w) / (tau - 1.0), -1.0 / (tau - 1.0))
                } else {
                    (0.0, 0.0)
                }
            }
            PenaltyKind::Ridge => (lambda * weight * w, lambda * weight),
            PenaltyKind::None => (0.0, 0.0),
        }
    }

    /// Distance of gradient `g` from the penalty's (super)differential at `w`.
    pub(crate) fn kkt_violation(&self, w: f64, g: f64, lambda: f64, weight: f64) -> f64 {
        match self.kind {
            PenaltyKind::L1 | PenaltyKind::AdaptiveL1 => {
                if w == 0.0 {
                    (g.abs() - lambda * weight).max(0.0)
                } else {
                    (g - lambda * weight * w.signum()).abs()
                }
            }
            PenaltyKind::Scad => {
                if w == 0.0 {
                    (g.abs() - lambda).max(0.0)
                } else {
                    (g - scad_derivative(w, lambda, self.scad_shape)).abs()
                }
            }
            PenaltyKind::Ridge => (g - lambda * weight * w).abs(),
            PenaltyKind::None => g.abs(),
        }
    }
}
