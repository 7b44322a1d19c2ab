//! Observation windows, point patterns and gridded images.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangular observation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Window {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        let w = Self { x0, x1, y0, y1 };
        w.validate()?;
        Ok(w)
    }

    pub fn unit() -> Self {
        Self {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.x0, self.x1, self.y0, self.y1].iter().all(|v| v.is_finite()) && self.x1 > self.x0 && self.y1 > self.y0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "window [{}, {}] x [{}, {}] must have positive side lengths",
                self.x0, self.x1, self.y0, self.y1
            )))
        }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    /// Bounding box of `points` expanded by `frac` of the extent on every side.
    /// Degenerate extents fall back to a unit-width side centred on the data.
    pub fn bounding(points: &[[f64; 2]], frac: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("bounding box of no points".into()));
        }
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in points {
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(p[1]);
            y1 = y1.max(p[1]);
        }
        let pad = |lo: f64, hi: f64| {
            let ext = hi - lo;
            if ext > 0.0 {
                (lo - frac * ext, hi + frac * ext)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        Window::new(x0, x1, y0, y1)
    }

    /// Affine map into the unit square.
    pub fn to_unit(&self, p: [f64; 2]) -> [f64; 2] {
        [(p[0] - self.x0) / self.width(), (p[1] - self.y0) / self.height()]
    }

    pub fn from_unit(&self, t: [f64; 2]) -> [f64; 2] {
        [self.x0 + t[0] * self.width(), self.y0 + t[1] * self.height()]
    }

    pub fn approx_eq(&self, other: &Window) -> bool {
        let tol = 1e-9 * (self.width() + self.height());
        (self.x0 - other.x0).abs() <= tol
            && (self.x1 - other.x1).abs() <= tol
            && (self.y0 - other.y0).abs() <= tol
            && (self.y1 - other.y1).abs() <= tol
    }
}

/// Event locations inside a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPattern {
    pub points: Vec<[f64; 2]>,
    pub window: Window,
}

impl PointPattern {
    pub fn new(points: Vec<[f64; 2]>, window: Window) -> Result<Self> {
        window.validate()?;
        if let Some(p) = points.iter().find(|p| !window.contains(**p)) {
            return Err(Error::Domain {
                x: p[0],
                y: p[1],
                what: "window",
            });
        }
        Ok(Self { points, window })
    }

    pub fn empty(window: Window) -> Self {
        Self {
            points: Vec::new(),
            window,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Cell-centred raster over a window. `values[iy * nx + ix]`, with `iy = 0`
/// the bottom row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridImage {
    pub nx: usize,
    pub ny: usize,
    pub window: Window,
    pub values: Vec<f64>,
}

impl GridImage {
    pub fn new(nx: usize, ny: usize, window: Window, values: Vec<f64>) -> Result<Self> {
        window.validate()?;
        if nx == 0 || ny == 0 || values.len() != nx * ny {
            return Err(Error::Dimension(format!("{} values for a {nx}x{ny} grid", values.len())));
        }
        Ok(Self { nx, ny, window, values })
    }

    pub fn constant(nx: usize, ny: usize, window: Window, value: f64) -> Result<Self> {
        Self::new(nx, ny, window, vec![value; nx * ny])
    }

    /// Builds an image by evaluating `f` at every cell centre.
    pub fn from_fn(nx: usize, ny: usize, window: Window, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(nx * ny);
        let dx = window.width() / nx as f64;
        let dy = window.height() / ny as f64;
        for iy in 0..ny {
            for ix in 0..nx {
                values.push(f([window.x0 + (ix as f64 + 0.5) * dx, window.y0 + (iy as f64 + 0.5) * dy]));
            }
        }
        Self::new(nx, ny, window, values)
    }

    pub fn cell_width(&self) -> f64 {
        self.window.width() / self.nx as f64
    }

    pub fn cell_height(&self) -> f64 {
        self.window.height() / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_width() * self.cell_height()
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            self.window.x0 + (ix as f64 + 0.5) * self.cell_width(),
            self.window.y0 + (iy as f64 + 0.5) * self.cell_height(),
        ]
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Riemann sum `Σ value · cell area`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridImage {
        GridImage {
            nx: self.nx,
            ny: self.ny,
            window: self.window,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Bilinear interpolation between cell centres; constant extrapolation in
    /// the half-cell margin along the window edge.
    pub fn bilinear(&self, p: [f64; 2]) -> f64 {
        let (ix0, ix1, fx) = axis_weights((p[0] - self.window.x0) / self.cell_width() - 0.5, self.nx);
        let (iy0, iy1, fy) = axis_weights((p[1] - self.window.y0) / self.cell_height() - 0.5, self.ny);
        let v00 = self.get(ix0, iy0);
        let v10 = self.get(ix1, iy0);
        let v01 = self.get(ix0, iy1);
        let v11 = self.get(ix1, iy1);
        (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11)
    }
}

fn axis_weights(u: f64, n: usize) -> (usize, usize, f64) {
    if n == 1 || u <= 0.0 {
        return (0, 0, 0.0);
    }
    let last = (n - 1) as f64;
    if u >= last {
        return (n - 1, n - 1, 0.0);
    }
    let i0 = u.floor() as usize;
    (i0, i0 + 1, u - i0 as f64)
}
