//! Simulation-study orchestration: replicate generation, method runs,
//! evaluation and the replicate/summary outputs.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvaluationReport, ScenarioTruth};
use crate::par::{self, derive_seed, Execution};
use crate::select::{run_method, Method, MethodConfig, MuPlugin, SelectionResult};
use crate::simulate::{calibrate_intercept, simulate_ipp, simulate_thomas, true_beta, GrfSampler, GrfSpec, ThomasSpec, ACTIVE_PREDICTORS};
use crate::solver::{PathSpec, SolverConfig};
use crate::spatial::{GridImage, PointPattern, Window};

/// Environment variable holding the worker count for replicate dispatch.
pub const THREADS_ENV: &str = "HAARSEL_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Poisson,
    ThomasModerate,
    ThomasHigh,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Poisson => "poisson",
            ScenarioKind::ThomasModerate => "thomas_moderate",
            ScenarioKind::ThomasHigh => "thomas_high",
        }
    }

    pub fn thomas(self) -> Option<ThomasSpec> {
        match self {
            ScenarioKind::Poisson => None,
            ScenarioKind::ThomasModerate => Some(ThomasSpec::moderate()),
            ScenarioKind::ThomasHigh => Some(ThomasSpec::high()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrfConfig {
    pub sill: f64,
    pub range: f64,
    pub resolution: usize,
}

impl Default for GrfConfig {
    fn default() -> Self {
        Self {
            sill: 1.0,
            range: 0.25,
            resolution: 64,
        }
    }
}

impl GrfConfig {
    pub fn spec(&self) -> GrfSpec {
        GrfSpec {
            sill: self.sill,
            range: self.range,
            nx: self.resolution,
            ny: self.resolution,
            window: Window::unit(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub mu_targets: Vec<f64>,
    /// Number of predictors, the first ten active.
    pub p_n: usize,
    pub j: u32,
    pub j0: u32,
    pub dummies: usize,
    pub replicates: usize,
    pub master_seed: u64,
    pub methods: Vec<Method>,
    pub solver: SolverConfig,
    pub path: PathSpec,
    pub mu_plugin: MuPlugin,
    pub scad_shape: f64,
    pub adaptive_exponent: f64,
    pub grf: GrfConfig,
    /// Cells per side of the RMSPE evaluation grid.
    pub rmspe_grid: usize,
    /// Include wall-clock runtimes in the replicate, summary and run files.
    /// Runtimes always go to `timings.csv`.
    pub report_runtime: bool,
    /// Write one JSON file per (μ, method, replicate).
    pub write_runs: bool,
    pub output_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioKind::Poisson,
            mu_targets: vec![100.0, 500.0],
            p_n: 50,
            j: 2,
            j0: 0,
            dummies: 256,
            replicates: 20,
            master_seed: 20240601,
            methods: Method::ALL.to_vec(),
            solver: SolverConfig::default(),
            path: PathSpec::default(),
            mu_plugin: MuPlugin::default(),
            scad_shape: 3.7,
            adaptive_exponent: 1.0,
            grf: GrfConfig::default(),
            rmspe_grid: 64,
            report_runtime: false,
            write_runs: true,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ScenarioConfig {
    /// Parses a JSON config; errors carry the line and column.
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let msg = if msg.contains("unknown variant") && (msg.contains("LLI") || msg.contains("LASSO")) {
                format!("{msg} (valid methods: {})", Method::valid_names())
            } else {
                msg
            };
            Error::Config(format!("{origin}:{}:{}: {msg}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.mu_targets.is_empty() || self.mu_targets.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return bad("mu_targets must be a nonempty list of positive numbers".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.p_n < ACTIVE_PREDICTORS {
            return bad(format!("p_n must be at least {ACTIVE_PREDICTORS}"));
        }
        if self.methods.is_empty() {
            return bad(format!("methods must list at least one of {}", Method::valid_names()));
        }
        if self.j < self.j0 || self.j > 10 {
            return bad(format!("need j0 <= j <= 10 (got j0 = {}, j = {})", self.j0, self.j));
        }
        if self.dummies == 0 {
            return bad("dummies must be positive".into());
        }
        if self.rmspe_grid < 2 {
            return bad("rmspe_grid must be at least 2".into());
        }
        self.grf.spec().validate().map_err(|e| Error::Config(format!("grf: {e}")))
    }

    pub fn method_config(&self, method: Method, exec: Execution) -> MethodConfig {
        MethodConfig {
            method,
            j: self.j,
            j0: self.j0,
            dummies: self.dummies,
            scad_shape: self.scad_shape,
            adaptive_exponent: self.adaptive_exponent,
            path: self.path,
            solver: self.solver,
            mu_plugin: self.mu_plugin,
            exec,
        }
    }

    /// Seed of replicate `i`: `master ⊕ i`.
    pub fn replicate_seed(&self, i: usize) -> u64 {
        self.master_seed ^ i as u64
    }
}

/// Covariate names `X1, X2, …`.
pub fn covariate_names(p_n: usize) -> Vec<String> {
    (1..=p_n).map(|p| format!("X{p}")).collect()
}

/// One simulated dataset.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub pattern: PointPattern,
    pub covariates: Vec<GridImage>,
    pub names: Vec<String>,
    pub intercept: f64,
    pub parents: Option<PointPattern>,
    pub bound_violations: usize,
}

/// Covariates are independent GRF draws; the log-intensity uses the first ten
/// with `β₁…β₁₀`, calibrated so its grid integral equals `mu`.
pub fn simulate_replicate(config: &ScenarioConfig, mu: f64, seed: u64) -> Result<Replicate> {
    let sampler = GrfSampler::shared(config.grf.spec())?;
    let covariates: Vec<GridImage> = (0..config.p_n)
        .map(|p| sampler.sample(derive_seed(seed, 100 + p as u64)))
        .collect::<Result<_>>()?;
    let first = &covariates[0];
    let mut field = GridImage::constant(first.nx, first.ny, first.window, 0.0)?;
    for iy in 0..field.ny {
        for ix in 0..field.nx {
            let c = field.cell_center(ix, iy);
            let t = field.window.to_unit(c);
            let mut v = 0.0;
            for (p, x) in covariates.iter().enumerate().take(ACTIVE_PREDICTORS) {
                v += true_beta(p + 1, t)? * x.get(ix, iy);
            }
            field.values[iy * field.nx + ix] = v;
        }
    }
    let b0 = calibrate_intercept(mu, &field)?;
    let log_intensity = field.map(|v| v + b0);
    let (pattern, parents, violations) = match config.scenario.thomas() {
        None => (simulate_ipp(&log_intensity.map(f64::exp), derive_seed(seed, 0))?, None, 0),
        Some(spec) => {
            let r = simulate_thomas(&log_intensity, &spec, derive_seed(seed, 0))?;
            (r.pattern, Some(r.parents), r.bound_violations)
        }
    };
    Ok(Replicate {
        pattern,
        covariates,
        names: covariate_names(config.p_n),
        intercept: b0,
        parents,
        bound_violations: violations,
    })
}

/// Outcome of one (μ, method, replicate) cell.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub mu: f64,
    pub method: Method,
    pub replicate: usize,
    pub seed: u64,
    pub outcome: std::result::Result<(EvaluationReport, SelectionResult), String>,
}

impl RunRecord {
    /// Failed outright, or some path point stopped short of convergence.
    pub fn is_partial(&self) -> bool {
        match &self.outcome {
            Err(_) => true,
            Ok((_, s)) => s.non_converged > 0 || s.path_error.is_some() || !s.refit.converged,
        }
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".into()
    }
}

fn run_cell(config: &ScenarioConfig, mu: f64, replicate: usize, exec: Execution) -> Vec<RunRecord> {
    let seed = config.replicate_seed(replicate);
    let data = catch_unwind(AssertUnwindSafe(|| simulate_replicate(config, mu, seed)))
        .map_err(panic_message)
        .and_then(|r| r.map_err(|e| e.to_string()));
    let truth = ScenarioTruth { n_predictors: config.p_n };
    config
        .methods
        .iter()
        .map(|&method| {
            let outcome = match &data {
                Err(e) => Err(format!("simulation failed: {e}")),
                Ok(rep) => catch_unwind(AssertUnwindSafe(|| -> Result<_> {
                    let mc = config.method_config(method, exec);
                    let sel = run_method(&rep.pattern, &rep.covariates, &rep.names, &mc)?;
                    let unit: Vec<[f64; 2]> = rep.pattern.points.iter().map(|p| rep.pattern.window.to_unit(*p)).collect();
                    let report = evaluate(
                        &sel,
                        &truth,
                        &unit,
                        config.rmspe_grid,
                        config.scenario.as_str(),
                        mu,
                        replicate,
                        seed,
                    )?;
                    Ok((report, sel))
                }))
                .map_err(panic_message)
                .and_then(|r| r.map_err(|e| e.to_string())),
            };
            RunRecord {
                mu,
                method,
                replicate,
                seed,
                outcome,
            }
        })
        .collect()
}

/// Runs every (μ, replicate) cell, all methods per cell, in deterministic
/// order. `threads == 0` uses the default pool size.
pub fn run_scenario(config: &ScenarioConfig, exec: Execution, threads: usize) -> Vec<RunRecord> {
    let cells: Vec<(f64, usize)> = config
        .mu_targets
        .iter()
        .flat_map(|&mu| (0..config.replicates).map(move |r| (mu, r)))
        .collect();
    par::with_threads(threads, || {
        par::map_slice(exec, &cells, |&(mu, r)| run_cell(config, mu, r, exec))
            .into_iter()
            .flatten()
            .collect()
    })
}

/// Worker count from [`THREADS_ENV`]; 0 (default pool) when unset or invalid.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(0)
}

/// Mean metrics of one (μ, method) group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub mu: f64,
    pub method: Method,
    pub replicates: usize,
    pub completed: usize,
    pub rmspe: f64,
    pub tpr_global: f64,
    pub tpr_local: Option<f64>,
    pub runtime_s: f64,
}

pub fn summarize(config: &ScenarioConfig, records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(usize, Method), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let mu_idx = config.mu_targets.iter().position(|m| *m == r.mu).unwrap_or(0);
        groups.entry((mu_idx, r.method)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((mu_idx, method), rs)| {
            let ok: Vec<&EvaluationReport> = rs.iter().filter_map(|r| r.outcome.as_ref().ok().map(|o| &o.0)).collect();
            let n = ok.len() as f64;
            let mean = |f: &dyn Fn(&EvaluationReport) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / n
                }
            };
            let tpr_local = if method.is_localized() {
                Some(mean(&|r| r.tpr_local.unwrap_or(0.0)))
            } else {
                None
            };
            SummaryRow {
                scenario: config.scenario.as_str().to_string(),
                mu: config.mu_targets[mu_idx],
                method,
                replicates: rs.len(),
                completed: ok.len(),
                rmspe: mean(&|r| r.rmspe),
                tpr_global: mean(&|r| r.tpr_global),
                tpr_local,
                runtime_s: mean(&|r| r.runtime_s),
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

/// Writes `replicates.csv`, `summary.csv`, `timings.csv` and, when enabled,
/// `runs/*.json` under the output directory.
pub fn write_outputs(config: &ScenarioConfig, records: &[RunRecord], dir: &Path) -> Result<Vec<SummaryRow>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let runtime = config.report_runtime;

    let mut w = csv_writer(&dir.join("replicates.csv"))?;
    let mut header = vec![
        "scenario",
        "mu",
        "method",
        "replicate",
        "seed",
        "n_events",
        "rmspe",
        "tpr_global",
        "tpr_local",
    ];
    if runtime {
        header.push("runtime_s");
    }
    header.extend([
        "n_selected",
        "false_positives",
        "lambda_star",
        "non_converged",
        "max_kkt",
        "status",
        "error",
    ]);
    w.write_record(&header)?;
    for r in records {
        let mut row: Vec<String> = vec![
            config.scenario.as_str().into(),
            r.mu.to_string(),
            r.method.to_string(),
            r.replicate.to_string(),
            r.seed.to_string(),
        ];
        match &r.outcome {
            Ok((rep, sel)) => {
                row.extend([
                    rep.n_events.to_string(),
                    rep.rmspe.to_string(),
                    rep.tpr_global.to_string(),
                    opt(rep.tpr_local),
                ]);
                if runtime {
                    row.push(rep.runtime_s.to_string());
                }
                row.extend([
                    rep.n_selected.to_string(),
                    rep.false_positives.to_string(),
                    sel.lambda_star.to_string(),
                    sel.non_converged.to_string(),
                    sel.max_kkt.to_string(),
                    if r.is_partial() { "partial" } else { "ok" }.into(),
                    sel.path_error.clone().unwrap_or_default(),
                ]);
            }
            Err(e) => {
                row.extend(["NA", "NA", "NA", "NA"].map(String::from));
                if runtime {
                    row.push("NA".into());
                }
                row.extend(["NA", "NA", "NA", "NA", "NA", "error"].map(String::from));
                row.push(e.clone());
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(dir.join("replicates.csv"), e))?;

    let summary = summarize(config, records);
    let mut w = csv_writer(&dir.join("summary.csv"))?;
    let mut header = vec![
        "scenario",
        "mu",
        "method",
        "replicates",
        "completed",
        "rmspe",
        "tpr_global",
        "tpr_local",
    ];
    if runtime {
        header.push("runtime_s");
    }
    w.write_record(&header)?;
    for s in &summary {
        let mut row = vec![
            s.scenario.clone(),
            s.mu.to_string(),
            s.method.to_string(),
            s.replicates.to_string(),
            s.completed.to_string(),
            s.rmspe.to_string(),
            s.tpr_global.to_string(),
            opt(s.tpr_local),
        ];
        if runtime {
            row.push(s.runtime_s.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(dir.join("summary.csv"), e))?;

    let mut w = csv_writer(&dir.join("timings.csv"))?;
    w.write_record(["scenario", "mu", "method", "replicate", "runtime_s"])?;
    for r in records {
        let t = r.outcome.as_ref().map_or("NA".to_string(), |o| o.0.runtime_s.to_string());
        w.write_record([
            config.scenario.as_str().to_string(),
            r.mu.to_string(),
            r.method.to_string(),
            r.replicate.to_string(),
            t,
        ])?;
    }
    w.flush().map_err(|e| Error::io(dir.join("timings.csv"), e))?;

    if config.write_runs {
        let runs = dir.join("runs");
        fs::create_dir_all(&runs).map_err(|e| Error::io(&runs, e))?;
        for r in records {
            let Ok((rep, sel)) = &r.outcome else { continue };
            let mut value = serde_json::json!({ "report": rep, "selection": sel });
            if !runtime {
                if let Some(o) = value["report"].as_object_mut() {
                    o.remove("runtime_s");
                }
                if let Some(o) = value["selection"].as_object_mut() {
                    o.remove("runtime_s");
                }
            }
            let path = runs.join(format!("mu{}_{}_r{:03}.json", r.mu, r.method, r.replicate));
            let text = serde_json::to_string_pretty(&value)?;
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(summary)
}
