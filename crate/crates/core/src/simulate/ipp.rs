use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::spatial::{GridImage, PointPattern, Window};

/// Intercept `b0` such that the Riemann integral of `exp(b0 + field)` over the
/// grid equals `target_mu`.
pub fn calibrate_intercept(target_mu: f64, field: &GridImage) -> Result<f64> {
    if !(target_mu > 0.0 && target_mu.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "target expected count must be positive, got {target_mu}"
        )));
    }
    // shift by the max so large fields do not overflow
    let m = field.max();
    if !m.is_finite() {
        return Err(Error::Numerical(format!("degenerate log-intensity field (max = {m})")));
    }
    let mass: f64 = field.values.iter().map(|v| (v - m).exp()).sum::<f64>() * field.cell_area();
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::Numerical("log-intensity field integrates to zero".into()));
    }
    Ok(target_mu.ln() - m - mass.ln())
}

/// Lewis–Shedler thinning against a dominating rate `bound` on `window`.
///
/// `intensity` is called for each candidate; candidates are kept with
/// probability `min(1, intensity / bound)`. Returns the kept points and the
/// number of candidates whose intensity exceeded the bound.
pub fn thin<R, F>(window: &Window, bound: f64, rng: &mut R, intensity: F) -> Result<(Vec<[f64; 2]>, usize)>
where
    R: Rng,
    F: Fn([f64; 2]) -> f64,
{
    if !(bound.is_finite() && bound >= 0.0) {
        return Err(Error::InvalidArgument(format!("thinning bound {bound} is not finite")));
    }
    if bound == 0.0 {
        return Ok((Vec::new(), 0));
    }
    let expected = bound * window.area();
    let n = Poisson::new(expected)
        .map_err(|e| Error::Numerical(format!("poisson({expected}): {e}")))?
        .sample(rng) as usize;
    let mut kept = Vec::new();
    let mut violations = 0;
    for _ in 0..n {
        let p = [
            window.x0 + rng.random::<f64>() * window.width(),
            window.y0 + rng.random::<f64>() * window.height(),
        ];
        let lam = intensity(p);
        if lam > bound {
            violations += 1;
        }
        let u: f64 = rng.random();
        if u * bound < lam {
            kept.push(p);
        }
    }
    Ok((kept, violations))
}

/// Inhomogeneous Poisson sample for a gridded intensity, bilinearly
/// interpolated between cell centres, thinned from rate `1.05 · max cell`.
pub fn simulate_ipp(intensity: &GridImage, seed: u64) -> Result<PointPattern> {
    if let Some(v) = intensity.values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "intensity values must be finite and non-negative (found {v})"
        )));
    }
    let bound = 1.05 * intensity.max();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (points, _) = thin(&intensity.window, bound, &mut rng, |p| intensity.bilinear(p))?;
    Ok(PointPattern {
        points,
        window: intensity.window,
    })
}
