#![allow(dead_code)]

use haarsel::design::{build_global_design, CovariateTable, LocalizedDesign};
use haarsel::quadrature::{build_quadrature, QuadratureScheme};
use haarsel::spatial::{PointPattern, Window};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random instance with `n` events, a 6×6 dummy grid and `k` covariates.
pub fn instance(seed: u64, n: usize, k: usize) -> (QuadratureScheme, LocalizedDesign) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
    let pat = PointPattern::new(pts, Window::unit()).unwrap();
    let scheme = build_quadrature(&pat, &Window::unit(), (6, 6)).unwrap();
    let m = scheme.len();
    let mut x = Array2::<f64>::zeros((m, k));
    for (i, node) in scheme.nodes.iter().enumerate() {
        for j in 0..k {
            let bump = if scheme.is_data[i] && j == 0 { 0.8 } else { 0.0 };
            x[[i, j]] = rng.random::<f64>() * 2.0 - 1.0 + bump + 0.3 * node[j % 2];
        }
    }
    let names = (0..k).map(|j| format!("X{j}")).collect();
    let table = CovariateTable::new(x, names).unwrap();
    let design = build_global_design(&table, &scheme).unwrap();
    (scheme, design)
}

/// Proximal gradient on `−ℓ/n + λ‖w‖₁` over the explicitly standardized
/// design, with backtracking.
pub fn prox_oracle(scheme: &QuadratureScheme, design: &LocalizedDesign, lambda: f64) -> (f64, Vec<f64>) {
    let m = scheme.len();
    let k = design.n_cols();
    let cols: Vec<Vec<f64>> = (0..k).map(|j| design.standardized_column(j)).collect();
    let n = scheme.n_data as f64;
    let y: Vec<f64> = scheme.responses();
    let smooth = |b: f64, w: &[f64]| -> f64 {
        let mut ll = 0.0;
        for i in 0..m {
            let eta = b + (0..k).map(|j| w[j] * cols[j][i]).sum::<f64>();
            ll += y[i] * eta - scheme.weights[i] * eta.exp();
        }
        -ll / n
    };
    let grad = |b: f64, w: &[f64]| -> (f64, Vec<f64>) {
        let mut g0 = 0.0;
        let mut g = vec![0.0; k];
        for i in 0..m {
            let eta = b + (0..k).map(|j| w[j] * cols[j][i]).sum::<f64>();
            let r = -(y[i] - scheme.weights[i] * eta.exp()) / n;
            g0 += r;
            for j in 0..k {
                g[j] += r * cols[j][i];
            }
        }
        (g0, g)
    };
    let soft = |z: f64, t: f64| z.signum() * (z.abs() - t).max(0.0);
    let mut b = (n / scheme.window.area()).ln();
    let mut w = vec![0.0; k];
    let mut step = 1.0;
    for _ in 0..20_000 {
        let (g0, g) = grad(b, &w);
        let f0 = smooth(b, &w);
        loop {
            let nb = b - step * g0;
            let nw: Vec<f64> = (0..k).map(|j| soft(w[j] - step * g[j], step * lambda)).collect();
            let d0 = nb - b;
            let d: Vec<f64> = (0..k).map(|j| nw[j] - w[j]).collect();
            let quad =
                f0 + g0 * d0 + (0..k).map(|j| g[j] * d[j]).sum::<f64>() + (d0 * d0 + d.iter().map(|v| v * v).sum::<f64>()) / (2.0 * step);
            if smooth(nb, &nw) <= quad + 1e-15 {
                b = nb;
                w = nw;
                step *= 1.2;
                break;
            }
            step *= 0.5;
        }
    }
    (b, w)
}
