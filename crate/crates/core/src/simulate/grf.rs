use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use faer::{Col, Mat, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::{GridImage, Window};

const JITTER: f64 = 1e-10;
const MAX_CELLS: usize = 128 * 128;

/// Zero-mean stationary Gaussian field with exponential covariance
/// `C(h) = sill · exp(−‖h‖ / range)` sampled at cell centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrfSpec {
    pub sill: f64,
    pub range: f64,
    pub nx: usize,
    pub ny: usize,
    pub window: Window,
}

impl Default for GrfSpec {
    fn default() -> Self {
        Self {
            sill: 1.0,
            range: 0.25,
            nx: 64,
            ny: 64,
            window: Window::unit(),
        }
    }
}

impl GrfSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sill > 0.0 && self.range > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "GRF needs sill > 0 and range > 0 (got {}, {})",
                self.sill, self.range
            )));
        }
        if self.nx == 0 || self.ny == 0 || self.nx * self.ny > MAX_CELLS {
            return Err(Error::InvalidArgument(format!(
                "GRF grid {}x{} outside 1..=128x128",
                self.nx, self.ny
            )));
        }
        self.window.validate()
    }

    pub fn covariance(&self, h: f64) -> f64 {
        self.sill * (-h / self.range).exp()
    }

    fn key(&self) -> [u64; 8] {
        [
            self.sill.to_bits(),
            self.range.to_bits(),
            self.nx as u64,
            self.ny as u64,
            self.window.x0.to_bits(),
            self.window.x1.to_bits(),
            self.window.y0.to_bits(),
            self.window.y1.to_bits(),
        ]
    }
}

/// Cholesky factor of the cell-centre covariance, reusable across draws.
pub struct GrfSampler {
    spec: GrfSpec,
    factor: Mat<f64>,
}

impl GrfSampler {
    pub fn new(spec: GrfSpec) -> Result<Self> {
        spec.validate()?;
        let template = GridImage::constant(spec.nx, spec.ny, spec.window, 0.0)?;
        let centers: Vec<[f64; 2]> = (0..spec.nx * spec.ny)
            .map(|i| template.cell_center(i % spec.nx, i / spec.nx))
            .collect();
        let n = centers.len();
        let cov = Mat::<f64>::from_fn(n, n, |i, j| {
            let dx = centers[i][0] - centers[j][0];
            let dy = centers[i][1] - centers[j][1];
            let c = spec.covariance((dx * dx + dy * dy).sqrt());
            if i == j {
                c + JITTER
            } else {
                c
            }
        });
        let llt = cov
            .llt(Side::Lower)
            .map_err(|e| Error::Numerical(format!("GRF covariance not positive definite: {e:?}")))?;
        let factor = llt.L().to_owned();
        Ok(Self { spec, factor })
    }

    /// Process-wide cached sampler for `spec`.
    pub fn shared(spec: GrfSpec) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<[u64; 8], Arc<GrfSampler>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = spec.key();
        if let Some(s) = cache.lock().expect("grf cache poisoned").get(&key) {
            return Ok(Arc::clone(s));
        }
        // factorization happens outside the lock; a racing thread may
        // duplicate the work but both results are identical
        let sampler = Arc::new(GrfSampler::new(spec)?);
        let mut guard = cache.lock().expect("grf cache poisoned");
        Ok(Arc::clone(guard.entry(key).or_insert(sampler)))
    }

    pub fn spec(&self) -> &GrfSpec {
        &self.spec
    }

    pub fn sample(&self, seed: u64) -> Result<GridImage> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.factor.nrows();
        let z = Col::<f64>::from_fn(n, |_| StandardNormal.sample(&mut rng));
        let field = &self.factor * &z;
        let values: Vec<f64> = (0..n).map(|i| field[i]).collect();
        GridImage::new(self.spec.nx, self.spec.ny, self.spec.window, values)
    }
}

/// Draws one field realization; identical seeds give identical fields.
pub fn simulate_grf(spec: &GrfSpec, seed: u64) -> Result<GridImage> {
    GrfSampler::shared(*spec)?.sample(seed)
}
