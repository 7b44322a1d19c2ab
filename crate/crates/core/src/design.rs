//! Covariate rasterization and the localized design matrix.
//!
//! Column `p·R + r` (0-based) of the localized design holds
//! `Ψ̃_r(t_m) · X_p(p_m)` where `t_m` is node `m` mapped to the unit square.
//! Global designs are the special case `R = 1` with no wavelet factor.

use ndarray::{Array2, ShapeBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::quadrature::QuadratureScheme;
use crate::spatial::{GridImage, Window};
use crate::wavelet::HaarBasis;

/// Columns whose weighted standard deviation falls below this are treated
/// as constant and kept out of the penalized fit.
const CONSTANT_TOL: f64 = 1e-12;

/// Maps window coordinates into `[0,1]²`. Points within rounding distance of
/// the boundary are clamped onto it.
pub fn affine_to_unit(window: &Window, points: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
    window.validate()?;
    let tol = 1e-9;
    points
        .iter()
        .map(|&p| {
            let t = window.to_unit(p);
            if t.iter().any(|v| !(*v >= -tol && *v <= 1.0 + tol)) {
                return Err(Error::Domain {
                    x: p[0],
                    y: p[1],
                    what: "window",
                });
            }
            Ok([t[0].clamp(0.0, 1.0), t[1].clamp(0.0, 1.0)])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Smoothing {
    /// Gaussian kernel with bandwidth equal to `cells` cell widths per axis.
    Gaussian { cells: f64 },
    /// Zero-bandwidth limit: each cell takes its nearest sample.
    #[default]
    Nearest,
}

impl Smoothing {
    pub fn standard() -> Self {
        Smoothing::Gaussian { cells: 2.0 }
    }
}

/// Smooths scattered `(point, value)` samples onto the cell centres of an
/// `nx × ny` grid with normalized kernel weights. Cells whose total weight
/// underflows take the global sample mean.
pub fn rasterize_covariate(
    samples: &[([f64; 2], f64)],
    window: &Window,
    resolution: (usize, usize),
    smoothing: Smoothing,
) -> Result<GridImage> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("cannot rasterize zero samples".into()));
    }
    let (nx, ny) = resolution;
    let template = GridImage::constant(nx, ny, *window, 0.0)?;
    let mean = samples.iter().map(|s| s.1).sum::<f64>() / samples.len() as f64;
    let mut values = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let c = template.cell_center(ix, iy);
            let v = match smoothing {
                Smoothing::Nearest => {
                    let mut best = (f64::INFINITY, mean);
                    for &(p, v) in samples {
                        let d = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
                        if d < best.0 {
                            best = (d, v);
                        }
                    }
                    best.1
                }
                Smoothing::Gaussian { cells } => {
                    let hx = cells * template.cell_width();
                    let hy = cells * template.cell_height();
                    let (mut num, mut den) = (0.0, 0.0);
                    for &(p, v) in samples {
                        let u = (p[0] - c[0]) / hx;
                        let w = (p[1] - c[1]) / hy;
                        let k = (-0.5 * (u * u + w * w)).exp();
                        num += k * v;
                        den += k;
                    }
                    if den > 0.0 {
                        num / den
                    } else {
                        mean
                    }
                }
            };
            values.push(v);
        }
    }
    GridImage::new(nx, ny, *window, values)
}

/// Covariate values at quadrature nodes, `M × P`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateTable {
    pub values: Array2<f64>,
    pub names: Vec<String>,
}

impl CovariateTable {
    pub fn new(values: Array2<f64>, names: Vec<String>) -> Result<Self> {
        if values.ncols() != names.len() {
            return Err(Error::Dimension(format!(
                "{} covariate columns for {} names",
                values.ncols(),
                names.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("covariate table has non-finite entries".into()));
        }
        Ok(Self { values, names })
    }

    pub fn n_predictors(&self) -> usize {
        self.names.len()
    }
}

/// Bilinear interpolation of every image at every quadrature node.
pub fn covariates_at_nodes(images: &[GridImage], names: &[String], scheme: &QuadratureScheme) -> Result<CovariateTable> {
    if images.len() != names.len() {
        return Err(Error::Dimension(format!("{} images for {} names", images.len(), names.len())));
    }
    for (img, name) in images.iter().zip(names) {
        if !img.window.approx_eq(&scheme.window) {
            return Err(Error::WindowMismatch(format!(
                "covariate '{name}' window {:?} differs from quadrature window {:?}",
                img.window, scheme.window
            )));
        }
    }
    let m = scheme.len();
    let p = images.len();
    let mut values = Array2::<f64>::zeros((m, p));
    for (row, node) in scheme.nodes.iter().enumerate() {
        for (col, img) in images.iter().enumerate() {
            values[[row, col]] = img.bilinear(*node);
        }
    }
    CovariateTable::new(values, names.to_vec())
}

/// Predictor `p` and atom `r` (both 0-based) behind a design column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnKey {
    pub predictor: usize,
    pub atom: usize,
}

/// Quadrature-weighted centring and scaling of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub center: f64,
    pub scale: f64,
    pub constant: bool,
}

#[derive(Debug, Clone)]
pub struct LocalizedDesign {
    /// `M × K`, column-major.
    pub z: Array2<f64>,
    pub columns: Vec<ColumnKey>,
    pub scales: Vec<ColumnScale>,
    /// Row indices where each column is nonzero.
    pub nonzero: Vec<Vec<u32>>,
    pub n_predictors: usize,
    pub n_atoms: usize,
    pub basis: Option<HaarBasis>,
    pub names: Vec<String>,
    /// Node positions in unit coordinates.
    pub unit_nodes: Vec<[f64; 2]>,
}

impl LocalizedDesign {
    pub fn n_rows(&self) -> usize {
        self.z.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.z.ncols()
    }

    pub fn is_localized(&self) -> bool {
        self.basis.is_some()
    }

    pub fn column_index(&self, predictor: usize, atom: usize) -> usize {
        predictor * self.n_atoms + atom
    }

    pub fn constant_columns(&self) -> Vec<usize> {
        self.scales.iter().enumerate().filter(|(_, s)| s.constant).map(|(k, _)| k).collect()
    }

    /// Column `k` after applying its standardization record.
    pub fn standardized_column(&self, k: usize) -> Vec<f64> {
        let s = self.scales[k];
        self.z
            .column(k)
            .iter()
            .map(|&v| if s.constant { 0.0 } else { (v - s.center) / s.scale })
            .collect()
    }

    /// `[1 | Z]` in original units, for likelihood evaluation.
    pub fn with_intercept(&self) -> Array2<f64> {
        let (m, k) = self.z.dim();
        let mut out = Array2::<f64>::ones((m, k + 1));
        out.slice_mut(ndarray::s![.., 1..]).assign(&self.z);
        out
    }
}

fn finish_design(
    z: Array2<f64>,
    columns: Vec<ColumnKey>,
    n_predictors: usize,
    n_atoms: usize,
    basis: Option<HaarBasis>,
    names: Vec<String>,
    unit_nodes: Vec<[f64; 2]>,
    scheme: &QuadratureScheme,
) -> LocalizedDesign {
    let total: f64 = scheme.total_weight();
    let k = z.ncols();
    let mut scales = Vec::with_capacity(k);
    let mut nonzero = Vec::with_capacity(k);
    for col in z.columns() {
        let mut mean = 0.0;
        let mut rows = Vec::new();
        for (m, &v) in col.iter().enumerate() {
            if v != 0.0 {
                rows.push(m as u32);
                mean += scheme.weights[m] * v;
            }
        }
        mean /= total;
        let var = col
            .iter()
            .zip(&scheme.weights)
            .map(|(&v, &w)| w * (v - mean) * (v - mean))
            .sum::<f64>()
            / total;
        let sd = var.sqrt();
        let constant = !(sd > CONSTANT_TOL * (1.0 + mean.abs()));
        scales.push(ColumnScale {
            center: mean,
            scale: if constant { 1.0 } else { sd },
            constant,
        });
        nonzero.push(rows);
    }
    LocalizedDesign {
        z,
        columns,
        scales,
        nonzero,
        n_predictors,
        n_atoms,
        basis,
        names,
        unit_nodes,
    }
}

fn unit_nodes(scheme: &QuadratureScheme) -> Result<Vec<[f64; 2]>> {
    affine_to_unit(&scheme.window, &scheme.nodes)
}

/// `Z = [X_p ⊙ Ψ̃]_p`: every covariate multiplied row-wise by every atom.
pub fn build_design(table: &CovariateTable, basis: &HaarBasis, scheme: &QuadratureScheme, exec: Execution) -> Result<LocalizedDesign> {
    let m = scheme.len();
    if table.values.nrows() != m {
        return Err(Error::Dimension(format!(
            "covariate table has {} rows for {m} nodes",
            table.values.nrows()
        )));
    }
    let t = unit_nodes(scheme)?;
    let psi = basis.basis_matrix(&t, exec)?;
    let p = table.n_predictors();
    let r = basis.len();
    let k = p * r;
    // columns are contiguous in the column-major buffer
    let mut data = vec![0.0; m * k];
    par::fill_rows(exec, &mut data, m.max(1), |col, out| {
        if m == 0 {
            return;
        }
        let (pi, ri) = (col / r, col % r);
        for (row, v) in out.iter_mut().enumerate() {
            let a = psi[[row, ri]];
            if a != 0.0 {
                *v = a * table.values[[row, pi]];
            }
        }
    });
    let z = Array2::from_shape_vec((m, k).f(), data).map_err(|e| Error::Dimension(e.to_string()))?;
    let columns = (0..k)
        .map(|c| ColumnKey {
            predictor: c / r,
            atom: c % r,
        })
        .collect();
    Ok(finish_design(z, columns, p, r, Some(basis.clone()), table.names.clone(), t, scheme))
}

/// Raw covariate design (no localization), one column per predictor.
pub fn build_global_design(table: &CovariateTable, scheme: &QuadratureScheme) -> Result<LocalizedDesign> {
    let m = scheme.len();
    if table.values.nrows() != m {
        return Err(Error::Dimension(format!(
            "covariate table has {} rows for {m} nodes",
            table.values.nrows()
        )));
    }
    let t = unit_nodes(scheme)?;
    let p = table.n_predictors();
    let mut z = Array2::<f64>::zeros((m, p).f());
    z.assign(&table.values);
    let columns = (0..p).map(|c| ColumnKey { predictor: c, atom: 0 }).collect();
    Ok(finish_design(z, columns, p, 1, None, table.names.clone(), t, scheme))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::build_quadrature;
    use crate::spatial::PointPattern;

    fn scheme(n: usize) -> QuadratureScheme {
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|i| [((i * 37 + 11) % 101) as f64 / 101.0, ((i * 53 + 7) % 97) as f64 / 97.0])
            .collect();
        let pat = PointPattern::new(pts, Window::unit()).unwrap();
        build_quadrature(&pat, &Window::unit(), (8, 8)).unwrap()
    }

    #[test]
    fn affine_examples() {
        let unit = Window::unit();
        assert_eq!(affine_to_unit(&unit, &[[0.3, 0.9]]).unwrap(), vec![[0.3, 0.9]]);
        let w = Window::new(0.0, 2.0, 0.0, 2.0).unwrap();
        assert_eq!(affine_to_unit(&w, &[[1.0, 1.0]]).unwrap(), vec![[0.5, 0.5]]);
        let w = Window::new(10.0, 20.0, -5.0, 5.0).unwrap();
        assert_eq!(affine_to_unit(&w, &[[15.0, 0.0]]).unwrap(), vec![[0.5, 0.5]]);
        assert!(affine_to_unit(&w, &[[25.0, 0.0]]).is_err());
    }

    #[test]
    fn rasterize_passthrough_and_constant() {
        let w = Window::unit();
        let img = GridImage::from_fn(4, 4, w, |p| p[0] * 10.0 + p[1]).unwrap();
        let samples: Vec<([f64; 2], f64)> = (0..16)
            .map(|i| {
                let c = img.cell_center(i % 4, i / 4);
                (c, img.get(i % 4, i / 4))
            })
            .collect();
        let out = rasterize_covariate(&samples, &w, (4, 4), Smoothing::Nearest).unwrap();
        assert_eq!(out.values, img.values);
        let single = rasterize_covariate(&[([0.9, 0.1], 3.5)], &w, (8, 8), Smoothing::standard()).unwrap();
        assert!(single.values.iter().all(|&v| (v - 3.5).abs() < 1e-12));
        assert!(rasterize_covariate(&[], &w, (2, 2), Smoothing::standard()).is_err());
    }

    #[test]
    fn rasterize_two_clusters_gives_diagonal_gradient() {
        let w = Window::unit();
        let samples = vec![([0.02, 0.02], 0.0), ([0.05, 0.03], 0.0), ([0.98, 0.98], 1.0), ([0.95, 0.97], 1.0)];
        let img = rasterize_covariate(&samples, &w, (8, 8), Smoothing::standard()).unwrap();
        let diag: Vec<f64> = (0..8).map(|i| img.get(i, i)).collect();
        for pair in diag.windows(2) {
            assert!(pair[1] >= pair[0]);
        }
        assert!(diag[0] < 0.01 && diag[7] > 0.99);
    }

    #[test]
    fn node_interpolation() {
        let q = scheme(5);
        let c = GridImage::constant(4, 4, Window::unit(), 2.5).unwrap();
        let t = covariates_at_nodes(&[c], &["c".into()], &q).unwrap();
        assert!(t.values.column(0).iter().all(|&v| (v - 2.5).abs() < 1e-12));

        let img = GridImage::new(2, 1, Window::unit(), vec![1.0, 3.0]).unwrap();
        let q2 = QuadratureScheme {
            nodes: vec![[0.25, 0.5], [0.5, 0.5]],
            weights: vec![0.5, 0.5],
            is_data: vec![true, false],
            n_data: 1,
            window: Window::unit(),
            grid: (1, 1),
        };
        let t2 = covariates_at_nodes(&[img.clone()], &["g".into()], &q2).unwrap();
        assert_eq!(t2.values[[0, 0]], 1.0);
        assert_eq!(t2.values[[1, 0]], 2.0);

        let shifted = GridImage::constant(2, 2, Window::new(0.0, 2.0, 0.0, 1.0).unwrap(), 1.0).unwrap();
        assert!(matches!(
            covariates_at_nodes(&[shifted], &["s".into()], &q),
            Err(Error::WindowMismatch(_))
        ));
    }

    #[test]
    fn unit_covariate_reproduces_basis_matrix() {
        let q = scheme(20);
        let basis = HaarBasis::new(0, 2).unwrap();
        let table = CovariateTable::new(Array2::ones((q.len(), 1)), vec!["one".into()]).unwrap();
        let d = build_design(&table, &basis, &q, Execution::Sequential).unwrap();
        let psi = basis.basis_matrix(&d.unit_nodes, Execution::Sequential).unwrap();
        assert_eq!(d.z, psi);
    }

    #[test]
    fn column_map_and_index_rule() {
        let q = scheme(30);
        let basis = HaarBasis::new(0, 2).unwrap();
        let vals = Array2::from_shape_fn((q.len(), 2), |(m, p)| (m as f64 * 0.1 + p as f64).sin() + 2.0);
        let table = CovariateTable::new(vals.clone(), vec!["a".into(), "b".into()]).unwrap();
        let d = build_design(&table, &basis, &q, Execution::Parallel).unwrap();
        assert_eq!(d.n_cols(), 32);
        // column 17 (1-based) = atom 1 × covariate 2
        assert_eq!(d.columns[16], ColumnKey { predictor: 1, atom: 0 });
        for (k, key) in d.columns.iter().enumerate() {
            assert_eq!(d.column_index(key.predictor, key.atom), k);
        }
        for m in 0..q.len() {
            for k in 0..32 {
                let key = d.columns[k];
                let want = basis.eval_basis(d.unit_nodes[m]).unwrap()[key.atom] * vals[[m, key.predictor]];
                assert_eq!(d.z[[m, k]], want);
            }
        }
    }

    #[test]
    fn standardization_moments() {
        let q = scheme(40);
        let basis = HaarBasis::new(0, 2).unwrap();
        let vals = Array2::from_shape_fn((q.len(), 3), |(m, p)| ((m * (p + 3)) as f64 * 0.37).cos());
        let table = CovariateTable::new(vals, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let d = build_design(&table, &basis, &q, Execution::Sequential).unwrap();
        let total = q.total_weight();
        for k in 0..d.n_cols() {
            if d.scales[k].constant {
                continue;
            }
            let col = d.standardized_column(k);
            let mean: f64 = col.iter().zip(&q.weights).map(|(v, w)| v * w).sum::<f64>() / total;
            let m2: f64 = col.iter().zip(&q.weights).map(|(v, w)| v * v * w).sum::<f64>() / total;
            assert!(mean.abs() < 1e-10);
            assert!((m2 - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn support_sparsity_and_constant_flags() {
        let q = scheme(25);
        let basis = HaarBasis::new(0, 2).unwrap();
        let table = CovariateTable::new(Array2::ones((q.len(), 1)), vec!["one".into()]).unwrap();
        let d = build_design(&table, &basis, &q, Execution::Sequential).unwrap();
        assert!(d.scales[0].constant);
        for (k, key) in d.columns.iter().enumerate() {
            let atom = basis.atoms()[key.atom];
            let [x0, x1, y0, y1] = atom.support();
            for (m, t) in d.unit_nodes.iter().enumerate() {
                let inside = t[0] >= x0 && (t[0] < x1 || x1 == 1.0) && t[1] >= y0 && (t[1] < y1 || y1 == 1.0);
                if !inside {
                    assert_eq!(d.z[[m, k]], 0.0);
                }
            }
            let nz: Vec<u32> = (0..q.len() as u32).filter(|&m| d.z[[m as usize, k]] != 0.0).collect();
            assert_eq!(nz, d.nonzero[k]);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let q = scheme(3);
        let basis = HaarBasis::new(0, 1).unwrap();
        let table = CovariateTable::new(Array2::ones((2, 1)), vec!["x".into()]).unwrap();
        assert!(build_design(&table, &basis, &q, Execution::Sequential).is_err());
        assert!(CovariateTable::new(Array2::ones((2, 2)), vec!["x".into()]).is_err());
    }
}
