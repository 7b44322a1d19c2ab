//! Readers and writers for the CSV and JSON file formats.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::select::{beta_hat_surface, predict_intensity, SelectionResult};
use crate::solver::FitPath;
use crate::spatial::{GridImage, PointPattern, Window};
use crate::wavelet::HaarBasis;

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn header_index(headers: &csv::StringRecord, name: &str, origin: &str) -> Result<usize> {
    headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name)).ok_or_else(|| {
        Error::Config(format!(
            "{origin}: missing column '{name}' (found: {})",
            headers.iter().collect::<Vec<_>>().join(",")
        ))
    })
}

fn parse_f64(s: &str, what: &str, line: u64, origin: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{origin}:{line}: cannot parse {what} '{s}'")))
}

/// Long-form covariate samples grouped by name: `(name, [(location, value)])`.
pub type CovariateSamples = Vec<(String, Vec<([f64; 2], f64)>)>;

/// Reads `x,y` rows (extra columns ignored).
pub fn read_points<R: Read>(reader: R, origin: &str) -> Result<Vec<[f64; 2]>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let ix = header_index(&headers, "x", origin)?;
    let iy = header_index(&headers, "y", origin)?;
    let mut points = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        points.push([parse_f64(&rec[ix], "x", line, origin)?, parse_f64(&rec[iy], "y", line, origin)?]);
    }
    Ok(points)
}

pub fn read_points_file(path: &Path) -> Result<Vec<[f64; 2]>> {
    read_points(open(path)?, &path.display().to_string())
}

pub fn write_points<W: Write>(writer: W, points: &[[f64; 2]]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "y"])?;
    for p in points {
        w.write_record([p[0].to_string(), p[1].to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<points>", e))?;
    Ok(())
}

/// Long covariate samples `x,y,name,value`, grouped by name in order of
/// first appearance.
pub fn read_long_covariates<R: Read>(reader: R, origin: &str) -> Result<CovariateSamples> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let ix = header_index(&headers, "x", origin)?;
    let iy = header_index(&headers, "y", origin)?;
    let iname = header_index(&headers, "name", origin)?;
    let ivalue = header_index(&headers, "value", origin)?;
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<([f64; 2], f64)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let name = rec[iname].to_string();
        if name.is_empty() {
            return Err(Error::Config(format!("{origin}:{line}: empty covariate name")));
        }
        let sample = (
            [parse_f64(&rec[ix], "x", line, origin)?, parse_f64(&rec[iy], "y", line, origin)?],
            parse_f64(&rec[ivalue], "value", line, origin)?,
        );
        if !groups.contains_key(&name) {
            order.push(name.clone());
        }
        groups.entry(name).or_default().push(sample);
    }
    Ok(order
        .into_iter()
        .map(|n| {
            let g = groups.remove(&n).unwrap_or_default();
            (n, g)
        })
        .collect())
}

pub fn read_long_covariates_file(path: &Path) -> Result<CovariateSamples> {
    read_long_covariates(open(path)?, &path.display().to_string())
}

/// Grid CSV: `resolution,nx,ny`, then `window,x0,x1,y0,y1`, then `ny` rows
/// of `nx` values, bottom row (`y0` side) first.
pub fn write_grid<W: Write>(mut writer: W, image: &GridImage) -> Result<()> {
    let w = &image.window;
    let mut text = format!("resolution,{},{}\nwindow,{},{},{},{}\n", image.nx, image.ny, w.x0, w.x1, w.y0, w.y1);
    for iy in 0..image.ny {
        let row: Vec<String> = (0..image.nx).map(|ix| image.get(ix, iy).to_string()).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    writer.write_all(text.as_bytes()).map_err(|e| Error::io("<grid>", e))
}

pub fn read_grid<R: Read>(reader: R, origin: &str) -> Result<GridImage> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String)> {
        loop {
            match lines.next() {
                Some((i, l)) => {
                    let l = l.map_err(|e| Error::io(origin, e))?;
                    if !l.trim().is_empty() {
                        return Ok((i + 1, l));
                    }
                }
                None => return Err(Error::Config(format!("{origin}: missing {what}"))),
            }
        }
    };
    let fields = |l: &str| l.split(',').map(|s| s.trim().to_string()).collect::<Vec<_>>();
    let (ln, l) = next("resolution line")?;
    let f = fields(&l);
    if f.len() != 3 || f[0] != "resolution" {
        return Err(Error::Config(format!("{origin}:{ln}: expected 'resolution,nx,ny'")));
    }
    let parse_usize = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Config(format!("{origin}:{ln}: bad resolution '{s}'")))
    };
    let (nx, ny) = (parse_usize(&f[1])?, parse_usize(&f[2])?);
    let (ln, l) = next("window line")?;
    let f = fields(&l);
    if f.len() != 5 || f[0] != "window" {
        return Err(Error::Config(format!("{origin}:{ln}: expected 'window,x0,x1,y0,y1'")));
    }
    let b: Vec<f64> = f[1..]
        .iter()
        .map(|s| parse_f64(s, "window bound", ln as u64, origin))
        .collect::<Result<_>>()?;
    let window = Window::new(b[0], b[1], b[2], b[3])?;
    let mut values = Vec::with_capacity(nx * ny);
    for _ in 0..ny {
        let (ln, l) = next("grid row")?;
        let f = fields(&l);
        if f.len() != nx {
            return Err(Error::Config(format!("{origin}:{ln}: expected {nx} values, found {}", f.len())));
        }
        for s in &f {
            values.push(parse_f64(s, "value", ln as u64, origin)?);
        }
    }
    GridImage::new(nx, ny, window, values)
}

pub fn read_grid_file(path: &Path) -> Result<GridImage> {
    read_grid(open(path)?, &path.display().to_string())
}

pub fn write_grid_file(path: &Path, image: &GridImage) -> Result<()> {
    write_grid(create(path)?, image)
}

/// Every `*.csv` grid in `dir`, named by file stem, sorted by name.
pub fn read_grid_dir(dir: &Path) -> Result<Vec<(String, GridImage)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("{}: no .csv grids found", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((name, read_grid_file(p)?))
        })
        .collect()
}

/// Refit coefficients. Localized fits list every atom of every predictor
/// with its `(j, orientation, k1, k2)`; global fits one row per covariate.
pub fn write_coefficients<W: Write>(writer: W, sel: &SelectionResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    match sel.basis()? {
        Some(basis) => {
            w.write_record(["predictor", "name", "j", "orientation", "k1", "k2", "atom", "estimate"])?;
            for p in 0..sel.n_predictors {
                for (r, a) in basis.atoms().iter().enumerate() {
                    w.write_record([
                        (p + 1).to_string(),
                        sel.names[p].clone(),
                        a.level.to_string(),
                        a.orientation.as_str().to_string(),
                        a.k1.to_string(),
                        a.k2.to_string(),
                        a.to_string(),
                        sel.refit.coefficients[p * basis.len() + r].to_string(),
                    ])?;
                }
            }
        }
        None => {
            w.write_record(["predictor", "name", "estimate"])?;
            for p in 0..sel.n_predictors {
                w.write_record([(p + 1).to_string(), sel.names[p].clone(), sel.refit.coefficients[p].to_string()])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<coefficients>", e))?;
    Ok(())
}

/// Selection path: `index,lambda,df,loglik,converged,wqbic,chosen`.
pub fn write_path<W: Write>(writer: W, sel: &SelectionResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["index", "lambda", "df", "loglik", "converged", "wqbic", "chosen"])?;
    for i in 0..sel.lambdas.len() {
        w.write_record([
            i.to_string(),
            sel.lambdas[i].to_string(),
            sel.path_df[i].to_string(),
            sel.path_loglik[i].to_string(),
            sel.path_converged[i].to_string(),
            sel.wqbic[i].to_string(),
            (i == sel.chosen_index).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<path>", e))?;
    Ok(())
}

/// Nonzero path coefficients in long form: `index,predictor,atom,estimate`,
/// with 1-based predictor and atom numbers (atom 1 for global fits).
pub fn write_path_coefficients<W: Write>(writer: W, path: &FitPath, n_atoms: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["index", "predictor", "atom", "estimate"])?;
    for (i, fit) in path.fits.iter().enumerate() {
        for (k, &c) in fit.coefficients.iter().enumerate() {
            if c != 0.0 {
                w.write_record([
                    i.to_string(),
                    (k / n_atoms + 1).to_string(),
                    (k % n_atoms + 1).to_string(),
                    c.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<path coefficients>", e))?;
    Ok(())
}

/// Long surface CSV `x,y,<column>` over the cell centres of a `G × G` grid
/// on `window`.
pub fn write_surface<W: Write>(writer: W, window: &Window, grid: usize, column: &str, f: impl Fn([f64; 2]) -> Result<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "y", column])?;
    for iy in 0..grid {
        for ix in 0..grid {
            let t = [(ix as f64 + 0.5) / grid as f64, (iy as f64 + 0.5) / grid as f64];
            let s = window.from_unit(t);
            w.write_record([s[0].to_string(), s[1].to_string(), f(t)?.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("<surface>", e))?;
    Ok(())
}

/// Estimated intensity `π̂` on a `G × G` grid; covariates are interpolated
/// from `images`.
pub fn write_intensity<W: Write>(writer: W, sel: &SelectionResult, images: &[GridImage], grid: usize) -> Result<()> {
    let basis = sel.basis()?;
    let window = sel.window;
    write_surface(writer, &window, grid, "intensity", |t| {
        let s = window.from_unit(t);
        let x: Vec<f64> = images.iter().map(|img| img.bilinear(s)).collect();
        if sel.n_events == 0 {
            return Ok(0.0);
        }
        predict_intensity(&sel.refit, &x, basis.as_ref(), t)
    })
}

/// `β̂_p` on a `G × G` grid.
pub fn write_beta_surface<W: Write>(writer: W, sel: &SelectionResult, p: usize, grid: usize) -> Result<()> {
    let basis: Option<HaarBasis> = sel.basis()?;
    write_surface(writer, &sel.window, grid, "beta", |t| {
        Ok(match &basis {
            Some(b) => beta_hat_surface(&sel.refit, b, p, t),
            None => sel.refit.coefficients[p],
        })
    })
}

/// Contents of `model.json` in a fit directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub selection: SelectionResult,
    /// How the window was chosen: `given`, `covariate_grid` or `bounding_box`.
    pub window_source: String,
    pub points_file: String,
    /// Covariate grids actually used, relative to the model file.
    pub covariate_grids: Vec<String>,
}

impl ModelFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))
    }
}

/// Points as a pattern on `window`.
pub fn pattern_on(points: Vec<[f64; 2]>, window: Window) -> Result<PointPattern> {
    PointPattern::new(points, window)
}
