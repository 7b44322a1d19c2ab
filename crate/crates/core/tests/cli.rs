use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use haarsel::io;
use haarsel::scenario::{simulate_replicate, ScenarioConfig};

fn haarsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_haarsel")).args(args).output().unwrap()
}

fn text(out: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
}

/// Points and three covariate grids from a simulated replicate.
fn fixture(dir: &Path, mu: f64) {
    let config = ScenarioConfig {
        p_n: 3,
        ..ScenarioConfig::default()
    };
    let rep = simulate_replicate(&config, mu, 21).unwrap();
    io::write_points(fs::File::create(dir.join("points.csv")).unwrap(), &rep.pattern.points).unwrap();
    let grids = dir.join("grids");
    fs::create_dir(&grids).unwrap();
    for (name, img) in rep.names.iter().zip(&rep.covariates) {
        io::write_grid_file(&grids.join(format!("{name}.csv")), img).unwrap();
    }
    let mut long = String::from("x,y,name,value\n");
    let img = &rep.covariates[0];
    for iy in (0..img.ny).step_by(4) {
        for ix in (0..img.nx).step_by(4) {
            let c = img.cell_center(ix, iy);
            long.push_str(&format!("{},{},{},{}\n", c[0], c[1], rep.names[0], img.get(ix, iy)));
        }
    }
    fs::write(dir.join("long.csv"), long).unwrap();
}

fn fit(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let points = dir.join("points.csv");
    let grids = dir.join("grids");
    let out = dir.join(out);
    let mut args = vec![
        "fit",
        "--points",
        points.to_str().unwrap(),
        "--grid-dir",
        grids.to_str().unwrap(),
        "--J",
        "1",
        "--dummies",
        "64",
        "--grid",
        "8",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    haarsel(&args)
}

#[test]
fn fit_then_export() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), 300.0);
    let out = fit(dir.path(), "run", &["--mu-plugin", "window_area"]);
    assert!(out.status.success(), "{}", text(&out));
    let run = dir.path().join("run");
    for f in [
        "model.json",
        "coefficients.csv",
        "path.csv",
        "path_coefficients.csv",
        "intensity.csv",
        "covariates/001.csv",
    ] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let model = io::ModelFile::load(&run.join("model.json")).unwrap();
    assert_eq!(model.window_source, "covariate_grid");
    assert_eq!(model.selection.n_predictors, 3);
    assert!(!model.selection.global_active.is_empty());
    assert_eq!(fs::read_to_string(run.join("intensity.csv")).unwrap().lines().count(), 65);

    let out = haarsel(&["export", run.to_str().unwrap(), "--grid", "4"]);
    assert!(out.status.success(), "{}", text(&out));
    let export = run.join("export");
    for &p in &model.selection.global_active {
        let file = export.join(format!("beta_{}.csv", model.selection.names[p]));
        let body = fs::read_to_string(&file).unwrap();
        assert_eq!(body.lines().next(), Some("x,y,beta"));
        assert_eq!(body.lines().count(), 17);
    }
    assert_eq!(fs::read_to_string(export.join("intensity.csv")).unwrap().lines().count(), 17);
}

#[test]
fn fit_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), 120.0);
    assert!(fit(dir.path(), "a", &["--method", "SCAD"]).status.success());
    assert!(fit(dir.path(), "b", &["--method", "SCAD"]).status.success());
    for f in ["coefficients.csv", "path.csv", "intensity.csv"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn long_covariates_use_a_padded_bounding_box() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), 100.0);
    let run = dir.path().join("run");
    let out = haarsel(&[
        "fit",
        "--points",
        dir.path().join("points.csv").to_str().unwrap(),
        "--covariates",
        dir.path().join("long.csv").to_str().unwrap(),
        "--method",
        "LASSO",
        "--resolution",
        "16",
        "--grid",
        "4",
        "--out",
        run.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out));
    let model = io::ModelFile::load(&run.join("model.json")).unwrap();
    assert_eq!(model.window_source, "bounding_box");
    assert_eq!(model.selection.n_predictors, 1);
    let grid = io::read_grid_file(&run.join("covariates/001.csv")).unwrap();
    assert_eq!((grid.nx, grid.ny), (16, 16));
}

#[test]
fn empty_points_warn_and_succeed() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), 100.0);
    fs::write(dir.path().join("points.csv"), "x,y\n").unwrap();
    let out = fit(dir.path(), "run", &[]);
    assert!(out.status.success(), "{}", text(&out));
    assert!(text(&out).contains("warning"));
    let out = haarsel(&["export", dir.path().join("run").to_str().unwrap()]);
    assert!(out.status.success(), "{}", text(&out));
    let export = dir.path().join("run/export");
    let files: Vec<_> = fs::read_dir(&export).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files, ["intensity.csv"]);
}

#[test]
fn failures_set_the_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = haarsel(&["export", dir.path().join("missing").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out).contains("error"));

    fixture(dir.path(), 100.0);
    let out = fit(dir.path(), "run", &["--method", "RIDGE"]);
    assert_eq!(out.status.code(), Some(2), "clap usage errors exit with 2");
    let out = fit(dir.path(), "run", &["--window", "0,1,1,0"]);
    assert_ne!(out.status.code(), Some(0));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"p_n\": 3,\n \"replicates\": \"many\"}").unwrap();
    let out = haarsel(&["scenario", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out).contains(":2:"), "{}", text(&out));
}

#[test]
fn scenario_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    fs::write(
        &config,
        r#"{"scenario": "poisson", "mu_targets": [80], "p_n": 12, "j": 1, "dummies": 64,
            "replicates": 2, "methods": ["LASSO", "LLI"], "rmspe_grid": 16}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = Command::new(env!("CARGO_BIN_EXE_haarsel"))
        .args(["scenario", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .env("HAARSEL_THREADS", "2")
        .output()
        .unwrap();
    assert!(matches!(out.status.code(), Some(0) | Some(2)), "{}", text(&out));
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    let replicates = fs::read_to_string(out_dir.join("replicates.csv")).unwrap();
    assert_eq!(replicates.lines().count(), 5);
    assert!(out_dir.join("timings.csv").is_file());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 2);
}
