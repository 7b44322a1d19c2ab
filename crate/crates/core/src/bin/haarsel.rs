use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use haarsel::design::{rasterize_covariate, Smoothing};
use haarsel::io::{self, ModelFile};
use haarsel::par::Execution;
use haarsel::scenario::{self, ScenarioConfig, THREADS_ENV};
use haarsel::select::{run_method_with_path, Method, MethodConfig, MuPlugin};
use haarsel::spatial::{GridImage, Window};
use haarsel::{Error, Result};

#[derive(Parser)]
#[command(
    name = "haarsel",
    version,
    about = "Local variable selection for spatial point-process intensities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation study from a JSON config.
    Scenario(ScenarioArgs),
    /// Fit one method to observed points and covariates.
    Fit(FitArgs),
    /// Write gridded coefficient surfaces and intensity from a fit directory.
    Export(ExportArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    config: PathBuf,
    /// Output directory, overriding `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run replicates one at a time.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct FitArgs {
    /// Event locations, CSV with header `x,y`.
    #[arg(long)]
    points: PathBuf,
    /// Covariate samples in long form, CSV `x,y,name,value`.
    #[arg(long, conflicts_with = "grid_dir", required_unless_present = "grid_dir")]
    covariates: Option<PathBuf>,
    /// Directory of covariate grid CSVs, one per covariate.
    #[arg(long)]
    grid_dir: Option<PathBuf>,
    #[arg(long, default_value = "LLI")]
    method: Method,
    /// Finest Haar level.
    #[arg(long = "J", default_value_t = 3)]
    j: u32,
    /// Coarsest Haar level.
    #[arg(long, default_value_t = 0)]
    j0: u32,
    /// Number of dummy quadrature points.
    #[arg(long, default_value_t = 256)]
    dummies: usize,
    /// Observation window `x0,x1,y0,y1`.
    #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
    window: Option<Window>,
    /// Cells per side when rasterizing long covariates.
    #[arg(long, default_value_t = 64)]
    resolution: usize,
    /// Cells per side of the exported intensity grid.
    #[arg(long, default_value_t = 64)]
    grid: usize,
    #[arg(long, value_parser = parse_plugin, default_value = "observed_count")]
    mu_plugin: MuPlugin,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    /// Directory written by `fit`.
    run_dir: PathBuf,
    #[arg(long, default_value_t = 64)]
    grid: usize,
    /// Defaults to `<run_dir>/export`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_window(s: &str) -> std::result::Result<Window, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if v.len() != 4 {
        return Err(format!("expected x0,x1,y0,y1 (got {} values)", v.len()));
    }
    Window::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

fn parse_plugin(s: &str) -> std::result::Result<MuPlugin, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown plug-in '{s}'; valid: observed_count, window_area"))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn create_file(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn cmd_scenario(args: &ScenarioArgs) -> Result<ExitCode> {
    let config = ScenarioConfig::load(&args.config)?;
    let dir = args.out.clone().unwrap_or_else(|| config.output_dir.clone());
    let threads = scenario::threads_from_env();
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    log::info!(
        "{}: {} replicates × {} μ values × {} methods, {THREADS_ENV}={threads}",
        config.scenario.as_str(),
        config.replicates,
        config.mu_targets.len(),
        config.methods.len()
    );
    let start = Instant::now();
    let records = scenario::run_scenario(&config, exec, threads);
    let summary = scenario::write_outputs(&config, &records, &dir)?;
    for s in &summary {
        let local = s.tpr_local.map_or("NA".to_string(), |v| format!("{v:.3}"));
        println!(
            "mu={:<6} {:<5} {}/{} rmspe={:.4} tpr_global={:.3} tpr_local={local}",
            s.mu, s.method, s.completed, s.replicates, s.rmspe, s.tpr_global
        );
    }
    let partial = records.iter().filter(|r| r.is_partial()).count();
    eprintln!("wrote {} in {:.1}s", dir.display(), start.elapsed().as_secs_f64());
    if partial > 0 {
        eprintln!("warning: {partial} of {} runs failed or did not fully converge", records.len());
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

struct Loaded {
    window: Window,
    window_source: String,
    grids: Vec<(String, GridImage)>,
}

fn load_covariates(args: &FitArgs, points: &[[f64; 2]]) -> Result<Loaded> {
    if let Some(dir) = &args.grid_dir {
        let grids = io::read_grid_dir(dir)?;
        let Some((_, first)) = grids.first() else {
            return Err(Error::Config(format!("{}: no grid CSV files", dir.display())));
        };
        let grid_window = first.window;
        if let Some((name, _)) = grids.iter().find(|(_, g)| !g.window.approx_eq(&grid_window)) {
            return Err(Error::Config(format!("grid '{name}' has a different window from the others")));
        }
        let (window, source) = match args.window {
            Some(w) => (w, "given"),
            None => (grid_window, "covariate_grid"),
        };
        return Ok(Loaded {
            window,
            window_source: source.into(),
            grids,
        });
    }
    let path = args.covariates.as_ref().expect("clap enforces one covariate source");
    let samples = io::read_long_covariates_file(path)?;
    if samples.is_empty() {
        return Err(Error::Config(format!("{}: no covariate rows", path.display())));
    }
    let (window, source) = match args.window {
        Some(w) => (w, "given"),
        None => {
            let mut all: Vec<[f64; 2]> = points.to_vec();
            all.extend(samples.iter().flat_map(|(_, s)| s.iter().map(|(p, _)| *p)));
            (Window::bounding(&all, 0.01)?, "bounding_box")
        }
    };
    let res = (args.resolution, args.resolution);
    let grids = samples
        .iter()
        .map(|(name, s)| Ok((name.clone(), rasterize_covariate(s, &window, res, Smoothing::standard())?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Loaded {
        window,
        window_source: source.into(),
        grids,
    })
}

fn cmd_fit(args: &FitArgs) -> Result<ExitCode> {
    let points = io::read_points_file(&args.points)?;
    if points.is_empty() {
        eprintln!("warning: {} has no events; fitting the empty pattern", args.points.display());
    }
    let Loaded {
        window,
        window_source,
        grids,
    } = load_covariates(args, &points)?;
    let pattern = io::pattern_on(points, window)?;
    let names: Vec<String> = grids.iter().map(|(n, _)| n.clone()).collect();
    let images: Vec<GridImage> = grids.iter().map(|(_, g)| g.clone()).collect();

    let config = MethodConfig {
        j: args.j,
        j0: args.j0,
        dummies: args.dummies,
        mu_plugin: args.mu_plugin,
        ..MethodConfig::new(args.method)
    };
    let (sel, path) = run_method_with_path(&pattern, &images, &names, &config)?;

    let out = &args.out;
    let cov_dir = out.join("covariates");
    create_dir(&cov_dir)?;
    let mut grid_files = Vec::new();
    for (i, (_, img)) in grids.iter().enumerate() {
        let rel = format!("covariates/{:03}.csv", i + 1);
        io::write_grid_file(&out.join(&rel), img)?;
        grid_files.push(rel);
    }
    let model = ModelFile {
        selection: sel,
        window_source,
        points_file: args.points.display().to_string(),
        covariate_grids: grid_files,
    };
    model.save(&out.join("model.json"))?;
    let sel = &model.selection;
    io::write_coefficients(create_file(&out.join("coefficients.csv"))?, sel)?;
    io::write_path(create_file(&out.join("path.csv"))?, sel)?;
    if let Some(path) = &path {
        io::write_path_coefficients(create_file(&out.join("path_coefficients.csv"))?, path, sel.n_atoms)?;
    }
    io::write_intensity(create_file(&out.join("intensity.csv"))?, sel, &images, args.grid)?;

    let chosen: Vec<&str> = sel.global_active.iter().map(|&p| sel.names[p].as_str()).collect();
    println!(
        "{}: n={} λ*={:.4e} selected {} of {} predictors [{}] ({:.2}s)",
        sel.method,
        sel.n_events,
        sel.lambda_star,
        chosen.len(),
        sel.n_predictors,
        chosen.join(", "),
        sel.runtime_s
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_export(args: &ExportArgs) -> Result<ExitCode> {
    if args.grid < 1 {
        return Err(Error::InvalidArgument("grid must be at least 1".into()));
    }
    let model = ModelFile::load(&args.run_dir.join("model.json"))?;
    let images: Vec<GridImage> = model
        .covariate_grids
        .iter()
        .map(|rel| io::read_grid_file(&args.run_dir.join(rel)))
        .collect::<Result<_>>()?;
    let sel = &model.selection;
    if images.len() != sel.n_predictors {
        return Err(Error::Config(format!(
            "model has {} predictors but {} covariate grids",
            sel.n_predictors,
            images.len()
        )));
    }
    let out = args.out.clone().unwrap_or_else(|| args.run_dir.join("export"));
    create_dir(&out)?;
    for &p in &sel.global_active {
        let stem: String = sel.names[p]
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        let file = out.join(format!("beta_{stem}.csv"));
        io::write_beta_surface(create_file(&file)?, sel, p, args.grid)?;
    }
    io::write_intensity(create_file(&out.join("intensity.csv"))?, sel, &images, args.grid)?;
    println!("wrote {} surfaces and intensity.csv to {}", sel.global_active.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Scenario(a) => cmd_scenario(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Export(a) => cmd_export(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
