use std::f64::consts::PI;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::ipp::thin;
use crate::error::{Error, Result};
use crate::par::derive_seed;
use crate::spatial::{GridImage, PointPattern, Window};

/// Parent rate `kappa` (per unit area) and Gaussian dispersal scale `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThomasSpec {
    pub kappa: f64,
    pub sigma: f64,
    /// Side of the grid used to bound the modulated intensity.
    #[serde(default = "default_bound_grid")]
    pub bound_grid: usize,
    #[serde(default = "default_safety")]
    pub safety: f64,
}

fn default_bound_grid() -> usize {
    256
}

fn default_safety() -> f64 {
    1.2
}

impl ThomasSpec {
    pub fn new(kappa: f64, sigma: f64) -> Self {
        Self {
            kappa,
            sigma,
            bound_grid: default_bound_grid(),
            safety: default_safety(),
        }
    }

    pub fn moderate() -> Self {
        Self::new(80.0, 0.12)
    }

    pub fn high() -> Self {
        Self::new(30.0, 0.06)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.sigma > 0.0 && self.safety >= 1.0 && self.bound_grid > 0) {
            return Err(Error::InvalidArgument(format!("invalid Thomas spec {self:?}")));
        }
        Ok(())
    }
}

/// Cluster field `S(u) = (1/κ) Σ_c G(u − c; σ)` with `G` the isotropic
/// bivariate normal density.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterField {
    pub parents: Vec<[f64; 2]>,
    pub kappa: f64,
    pub sigma: f64,
}

impl ClusterField {
    fn norm(&self) -> f64 {
        1.0 / (2.0 * PI * self.sigma * self.sigma * self.kappa)
    }

    pub fn eval(&self, u: [f64; 2]) -> f64 {
        let inv = 1.0 / (2.0 * self.sigma * self.sigma);
        let s: f64 = self
            .parents
            .iter()
            .map(|c| {
                let dx = u[0] - c[0];
                let dy = u[1] - c[1];
                (-(dx * dx + dy * dy) * inv).exp()
            })
            .sum();
        s * self.norm()
    }

    /// Field at the centres of an `n × n` grid over `window`, using the
    /// separability of the Gaussian kernel.
    pub fn on_grid(&self, window: &Window, n: usize) -> Result<GridImage> {
        let template = GridImage::constant(n, n, *window, 0.0)?;
        if self.parents.is_empty() {
            return Ok(template);
        }
        let inv = 1.0 / (2.0 * self.sigma * self.sigma);
        let np = self.parents.len();
        let xs: Vec<f64> = (0..n).map(|i| template.cell_center(i, 0)[0]).collect();
        let ys: Vec<f64> = (0..n).map(|i| template.cell_center(0, i)[1]).collect();
        let gy = Mat::<f64>::from_fn(n, np, |iy, c| {
            let d = ys[iy] - self.parents[c][1];
            (-d * d * inv).exp()
        });
        let gx = Mat::<f64>::from_fn(np, n, |c, ix| {
            let d = xs[ix] - self.parents[c][0];
            (-d * d * inv).exp()
        });
        let s = &gy * &gx;
        let norm = self.norm();
        let mut values = Vec::with_capacity(n * n);
        for iy in 0..n {
            for ix in 0..n {
                values.push(s[(iy, ix)] * norm);
            }
        }
        GridImage::new(n, n, *window, values)
    }
}

#[derive(Debug, Clone)]
pub struct ThomasRealization {
    pub pattern: PointPattern,
    pub parents: PointPattern,
    /// Candidates whose modulated intensity exceeded the thinning bound.
    pub bound_violations: usize,
}

/// Thomas-type cluster pattern with intensity `exp(base(u)) · S(u)`.
///
/// Parents are a homogeneous Poisson(κ) sample on the window of
/// `base_log_intensity`; offspring are drawn by thinning against the
/// modulated intensity, with `base` bilinearly interpolated.
pub fn simulate_thomas(base_log_intensity: &GridImage, spec: &ThomasSpec, seed: u64) -> Result<ThomasRealization> {
    spec.validate()?;
    let window = base_log_intensity.window;
    let mut parent_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let expected = spec.kappa * window.area();
    let np = Poisson::new(expected)
        .map_err(|e| Error::Numerical(format!("poisson({expected}): {e}")))?
        .sample(&mut parent_rng) as usize;
    let parents: Vec<[f64; 2]> = (0..np)
        .map(|_| {
            [
                window.x0 + parent_rng.random::<f64>() * window.width(),
                window.y0 + parent_rng.random::<f64>() * window.height(),
            ]
        })
        .collect();
    let field = ClusterField {
        parents: parents.clone(),
        kappa: spec.kappa,
        sigma: spec.sigma,
    };
    let parents = PointPattern { points: parents, window };
    if np == 0 {
        return Ok(ThomasRealization {
            pattern: PointPattern::empty(window),
            parents,
            bound_violations: 0,
        });
    }

    let intensity = |u: [f64; 2]| base_log_intensity.bilinear(u).exp() * field.eval(u);
    let s_grid = field.on_grid(&window, spec.bound_grid)?;
    let mut max = 0.0f64;
    for iy in 0..s_grid.ny {
        for ix in 0..s_grid.nx {
            let c = s_grid.cell_center(ix, iy);
            max = max.max(base_log_intensity.bilinear(c).exp() * s_grid.get(ix, iy));
        }
    }
    let bound = spec.safety * max;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
    let (points, violations) = thin(&window, bound, &mut rng, intensity)?;
    if violations > 0 {
        log::debug!("thomas thinning: {violations} candidates above the bound");
    }
    Ok(ThomasRealization {
        pattern: PointPattern { points, window },
        parents,
        bound_violations: violations,
    })
}
