//! Berman–Turner quadrature and the approximated log-likelihood.
//!
//! With nodes `p_m` (data and dummy), weights `ω_m` and labels `ỹ_m`, the
//! point-process log-likelihood is approximated by
//!
//! ```text
//! ℓ(w) ≈ Σ_m { ỹ_m z_mᵀw − ω_m exp(z_mᵀw) }
//! ```
//!
//! which is a Poisson GLM in `ỹ_m` with offset `log ω_m`.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::{PointPattern, Window};

/// Largest linear predictor accepted before `exp` is considered unsafe.
pub const ETA_LIMIT: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureScheme {
    /// Data nodes first (pattern order), then dummy nodes row-major by tile.
    pub nodes: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub is_data: Vec<bool>,
    pub n_data: usize,
    pub window: Window,
    pub grid: (usize, usize),
}

impl QuadratureScheme {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Labels as 0/1 responses.
    pub fn responses(&self) -> Vec<f64> {
        self.is_data.iter().map(|&d| if d { 1.0 } else { 0.0 }).collect()
    }

    /// GLM offsets `log ω_m`.
    pub fn offsets(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.ln()).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Side of the square dummy grid holding at least `target` dummies.
pub fn dummy_grid_side(target: usize) -> usize {
    let mut q = (target as f64).sqrt().ceil() as usize;
    while q * q < target {
        q += 1;
    }
    q.max(1)
}

fn tile_index(v: f64, lo: f64, width: f64, q: usize) -> usize {
    let k = ((v - lo) / width * q as f64).floor();
    if k <= 0.0 {
        0
    } else if k >= q as f64 {
        q - 1
    } else {
        k as usize
    }
}

/// Data nodes plus dummies at the centres of a `qx × qy` tiling. Each node's
/// weight is its tile area divided by the number of nodes in that tile.
pub fn build_quadrature(pattern: &PointPattern, window: &Window, grid: (usize, usize)) -> Result<QuadratureScheme> {
    window.validate()?;
    let (qx, qy) = grid;
    if qx == 0 || qy == 0 {
        return Err(Error::InvalidArgument(format!("dummy grid {qx}x{qy} is empty")));
    }
    if let Some(p) = pattern.points.iter().find(|p| !window.contains(**p)) {
        return Err(Error::Domain {
            x: p[0],
            y: p[1],
            what: "quadrature window",
        });
    }
    let n = pattern.len();
    let tile_w = window.width() / qx as f64;
    let tile_h = window.height() / qy as f64;
    let tile_area = tile_w * tile_h;

    let mut counts = vec![1usize; qx * qy];
    let mut data_tiles = Vec::with_capacity(n);
    for p in &pattern.points {
        let ix = tile_index(p[0], window.x0, window.width(), qx);
        let iy = tile_index(p[1], window.y0, window.height(), qy);
        let t = iy * qx + ix;
        counts[t] += 1;
        data_tiles.push(t);
    }

    let mut nodes = Vec::with_capacity(n + qx * qy);
    let mut weights = Vec::with_capacity(n + qx * qy);
    let mut is_data = Vec::with_capacity(n + qx * qy);
    for (p, &t) in pattern.points.iter().zip(&data_tiles) {
        nodes.push(*p);
        weights.push(tile_area / counts[t] as f64);
        is_data.push(true);
    }
    for iy in 0..qy {
        for ix in 0..qx {
            nodes.push([window.x0 + (ix as f64 + 0.5) * tile_w, window.y0 + (iy as f64 + 0.5) * tile_h]);
            weights.push(tile_area / counts[iy * qx + ix] as f64);
            is_data.push(false);
        }
    }
    Ok(QuadratureScheme {
        nodes,
        weights,
        is_data,
        n_data: n,
        window: *window,
        grid,
    })
}

fn check_dims(coeffs: &[f64], design: &ArrayView2<f64>, scheme: &QuadratureScheme) -> Result<()> {
    if design.nrows() != scheme.len() {
        return Err(Error::Dimension(format!(
            "design has {} rows for {} quadrature nodes",
            design.nrows(),
            scheme.len()
        )));
    }
    if design.ncols() != coeffs.len() {
        return Err(Error::Dimension(format!(
            "design has {} columns for {} coefficients",
            design.ncols(),
            coeffs.len()
        )));
    }
    Ok(())
}

/// Linear predictor `Z w` with the overflow guard applied.
pub fn linear_predictor(coeffs: &[f64], design: &ArrayView2<f64>, scheme: &QuadratureScheme) -> Result<Array1<f64>> {
    check_dims(coeffs, design, scheme)?;
    let w = Array1::from(coeffs.to_vec());
    let eta = design.dot(&w);
    guard(&eta)?;
    Ok(eta)
}

pub(crate) fn guard(eta: &Array1<f64>) -> Result<()> {
    for &e in eta.iter() {
        if !(e <= ETA_LIMIT) {
            return Err(Error::Overflow {
                value: e,
                limit: ETA_LIMIT,
            });
        }
    }
    Ok(())
}

/// Approximated log-likelihood `Σ_m { ỹ_m η_m − ω_m exp(η_m) }`.
pub fn bt_loglik(coeffs: &[f64], design: ArrayView2<f64>, scheme: &QuadratureScheme) -> Result<f64> {
    let eta = linear_predictor(coeffs, &design, scheme)?;
    Ok(loglik_from_eta(eta.as_slice().expect("contiguous"), scheme))
}

pub(crate) fn loglik_from_eta(eta: &[f64], scheme: &QuadratureScheme) -> f64 {
    eta.iter()
        .zip(&scheme.weights)
        .zip(&scheme.is_data)
        .map(|((&e, &w), &d)| if d { e - w * e.exp() } else { -w * e.exp() })
        .sum()
}

/// Score `Σ_m { ỹ_m − ω_m exp(η_m) } z_m`.
pub fn bt_score(coeffs: &[f64], design: ArrayView2<f64>, scheme: &QuadratureScheme) -> Result<Array1<f64>> {
    let eta = linear_predictor(coeffs, &design, scheme)?;
    let resid: Array1<f64> = eta
        .iter()
        .zip(&scheme.weights)
        .zip(&scheme.is_data)
        .map(|((&e, &w), &d)| f64::from(u8::from(d)) - w * e.exp())
        .collect();
    Ok(design.t().dot(&resid))
}

/// Hessian `−Σ_m ω_m exp(η_m) z_m z_mᵀ`.
pub fn bt_hessian(coeffs: &[f64], design: ArrayView2<f64>, scheme: &QuadratureScheme) -> Result<Array2<f64>> {
    let eta = linear_predictor(coeffs, &design, scheme)?;
    let k = design.ncols();
    let mut h = Array2::<f64>::zeros((k, k));
    for (m, row) in design.rows().into_iter().enumerate() {
        let mu = scheme.weights[m] * eta[m].exp();
        for a in 0..k {
            let za = row[a];
            if za == 0.0 {
                continue;
            }
            for b in a..k {
                h[[a, b]] -= mu * za * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            h[[a, b]] = h[[b, a]];
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn empty_pattern_gives_equal_dummy_weights() {
        let q = build_quadrature(&PointPattern::empty(Window::unit()), &Window::unit(), (2, 2)).unwrap();
        assert_eq!(q.len(), 4);
        assert_eq!(q.n_data, 0);
        assert!(q.weights.iter().all(|&w| w == 0.25));
    }

    #[test]
    fn counting_weights_share_the_tile() {
        let pat = PointPattern::new(vec![[0.1, 0.2]], Window::unit()).unwrap();
        let q = build_quadrature(&pat, &Window::unit(), (2, 2)).unwrap();
        assert_eq!(q.len(), 5);
        assert_eq!(q.weights[0], 0.125);
        assert_eq!(q.weights[1], 0.125); // dummy of tile (0, 0)
        assert_eq!(&q.weights[2..], &[0.25, 0.25, 0.25]);
        assert!((q.total_weight() - 1.0).abs() < 1e-15);
        assert!(q.is_data[0] && !q.is_data[1]);
    }

    #[test]
    fn dummy_count_from_target() {
        assert_eq!(dummy_grid_side(256), 16);
        assert_eq!(dummy_grid_side(250), 16);
        assert_eq!(dummy_grid_side(1), 1);
        let pts: Vec<[f64; 2]> = (0..37).map(|i| [(i as f64 * 0.37) % 1.0, (i as f64 * 0.61) % 1.0]).collect();
        let pat = PointPattern::new(pts, Window::unit()).unwrap();
        let q = build_quadrature(&pat, &Window::unit(), (16, 16)).unwrap();
        assert_eq!(q.len() - q.n_data, 256);
    }

    #[test]
    fn zero_coefficients_give_minus_area() {
        let w = Window::new(0.0, 3.0, 0.0, 2.0).unwrap();
        let pat = PointPattern::new(vec![[1.0, 1.0], [2.9, 0.1]], w).unwrap();
        let q = build_quadrature(&pat, &w, (4, 3)).unwrap();
        let z = Array2::<f64>::ones((q.len(), 1));
        let ll = bt_loglik(&[0.0], z.view(), &q).unwrap();
        assert!((ll + 6.0).abs() < 1e-12);
        let s = bt_score(&[0.0], z.view(), &q).unwrap();
        assert!((s[0] - (2.0 - 6.0)).abs() < 1e-12);
        let h = bt_hessian(&[0.0], z.view(), &q).unwrap();
        assert!((h[[0, 0]] + 6.0).abs() < 1e-12);
    }

    #[test]
    fn single_node_calculus() {
        let q = QuadratureScheme {
            nodes: vec![[0.5, 0.5]],
            weights: vec![1.0],
            is_data: vec![true],
            n_data: 1,
            window: Window::unit(),
            grid: (1, 1),
        };
        let z = Array2::<f64>::ones((1, 1));
        for c in [-1.0, 0.0, 0.7] {
            let ll = bt_loglik(&[c], z.view(), &q).unwrap();
            assert!((ll - (c - f64::exp(c))).abs() < 1e-15);
        }
        assert!(bt_score(&[0.0], z.view(), &q).unwrap()[0].abs() < 1e-15);
    }

    #[test]
    fn overflow_and_dimension_errors() {
        let q = build_quadrature(&PointPattern::empty(Window::unit()), &Window::unit(), (2, 2)).unwrap();
        let z = Array2::<f64>::ones((4, 1));
        assert!(matches!(bt_loglik(&[701.0], z.view(), &q), Err(Error::Overflow { .. })));
        let bad = Array2::<f64>::ones((3, 1));
        assert!(matches!(bt_loglik(&[0.0], bad.view(), &q), Err(Error::Dimension(_))));
        assert!(matches!(bt_score(&[0.0, 1.0], z.view(), &q), Err(Error::Dimension(_))));
    }
}
