mod common;

use common::{instance, prox_oracle};
use haarsel::solver::{fit_at, fit_path, kkt_violation, lambda_max, PathSpec, PenaltySpec, Problem, SolverConfig};

#[test]
fn l1_matches_proximal_gradient_oracle() {
    let cfg = SolverConfig::default();
    for seed in 0..10 {
        let (scheme, design) = instance(seed, 14, 3);
        assert_eq!(scheme.len(), 50);
        let problem = Problem::new(&design, &scheme).unwrap();
        let lmax = lambda_max(&problem, &PenaltySpec::l1()).unwrap();
        for frac in [0.5, 0.1, 0.01] {
            let lambda = lmax * frac;
            let fit = fit_at(&problem, &PenaltySpec::l1(), lambda, None, &cfg).unwrap();
            assert!(fit.converged, "seed {seed} frac {frac}");
            let (b, w) = prox_oracle(&scheme, &design, lambda);
            for (j, (a, b)) in fit.std_coefficients.iter().zip(&w).enumerate() {
                assert!((a - b).abs() < 1e-4, "seed {seed} frac {frac} coef {j}: {a} vs {b}");
            }
            assert!((fit.std_intercept - b).abs() < 1e-4);
        }
    }
}

#[test]
fn path_points_pass_kkt_and_start_at_null() {
    let cfg = SolverConfig::default();
    for seed in 0..5 {
        let (scheme, design) = instance(100 + seed, 30, 4);
        let problem = Problem::new(&design, &scheme).unwrap();
        let spec = PathSpec {
            length: 30,
            ratio: 1e-3,
            early_stop: false,
        };
        let path = fit_path(&problem, &PenaltySpec::l1(), &spec, &cfg).unwrap();
        assert_eq!(path.len(), 30);
        assert!(path.fits[0].coefficients.iter().all(|w| *w == 0.0));
        assert!((path.fits[0].intercept - 30f64.ln()).abs() < 1e-12);
        for f in &path.fits {
            assert!(f.converged);
            let v = kkt_violation(&problem, &PenaltySpec::l1(), f.lambda, f).unwrap();
            assert!(v <= 1e-6, "seed {seed}: kkt {v}");
        }
    }
}
