//! Separable 2D Haar dictionary on the unit square.
//!
//! Generators: `φ = 1[0,1)` and `ψ = +1` on `[0, ½)`, `−1` on `[½, 1)`. Atoms at
//! scale `j` are normalized by `2^j` so they have unit L2 norm on `[0,1]²`:
//!
//! ```text
//! Φ_{j,k}(x, y)  = 2^j φ(2^j x − k1) φ(2^j y − k2)
//! Ψ^H_{j,k}      = 2^j ψ(2^j x − k1) φ(2^j y − k2)
//! Ψ^V_{j,k}      = 2^j φ(2^j x − k1) ψ(2^j y − k2)
//! Ψ^D_{j,k}      = 2^j ψ(2^j x − k1) ψ(2^j y − k2)
//! ```
//!
//! Tiles are half-open; a coordinate equal to 1.0 belongs to the last tile, so
//! every point of the closed square lands in exactly one tile per level.

use std::fmt;
use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Orientation {
    Scaling,
    H,
    V,
    D,
}

impl Orientation {
    pub const DETAILS: [Orientation; 3] = [Orientation::H, Orientation::V, Orientation::D];

    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::Scaling => "S",
            Orientation::H => "H",
            Orientation::V => "V",
            Orientation::D => "D",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "S" | "SCALING" | "scaling" => Some(Orientation::Scaling),
            "H" | "h" => Some(Orientation::H),
            "V" | "v" => Some(Orientation::V),
            "D" | "d" => Some(Orientation::D),
            _ => None,
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One atom `(j, orientation, k1, k2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WaveletIndex {
    pub level: u32,
    pub orientation: Orientation,
    pub k1: u32,
    pub k2: u32,
}

impl WaveletIndex {
    pub fn new(level: u32, orientation: Orientation, k1: u32, k2: u32) -> Self {
        Self {
            level,
            orientation,
            k1,
            k2,
        }
    }

    pub fn scaling(level: u32, k1: u32, k2: u32) -> Self {
        Self::new(level, Orientation::Scaling, k1, k2)
    }

    fn check_shifts(&self) -> Result<()> {
        if self.level >= 31 {
            return Err(Error::IndexOutOfRange(format!("level {} too large", self.level)));
        }
        let n = 1u32 << self.level;
        if self.k1 >= n || self.k2 >= n {
            return Err(Error::IndexOutOfRange(format!(
                "shift ({}, {}) outside 0..{} at level {}",
                self.k1, self.k2, n, self.level
            )));
        }
        Ok(())
    }

    /// Support tile `[x0, x1) × [y0, y1)` in unit coordinates.
    pub fn support(&self) -> [f64; 4] {
        let w = 1.0 / f64::from(1u32 << self.level);
        let x0 = f64::from(self.k1) * w;
        let y0 = f64::from(self.k2) * w;
        [x0, x0 + w, y0, y0 + w]
    }

    /// Atom value at `t`, assuming the shift range was validated.
    #[inline]
    fn value_unchecked(&self, t: [f64; 2]) -> f64 {
        let j = self.level;
        let tx = tile(t[0], j);
        let ty = tile(t[1], j);
        if tx != self.k1 || ty != self.k2 {
            return 0.0;
        }
        let scale = f64::from(1u32 << j);
        let sign = match self.orientation {
            Orientation::Scaling => 1.0,
            Orientation::H => half_sign(t[0], j),
            Orientation::V => half_sign(t[1], j),
            Orientation::D => half_sign(t[0], j) * half_sign(t[1], j),
        };
        scale * sign
    }
}

impl fmt::Display for WaveletIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "j={}: {}({},{})", self.level, self.orientation, self.k1, self.k2)
    }
}

/// Dyadic tile index of `x ∈ [0,1]` at level `j`; 1.0 maps to the last tile.
#[inline]
pub fn tile(x: f64, j: u32) -> u32 {
    let n = 1u32 << j;
    let k = (x * f64::from(n)).floor();
    if k <= 0.0 {
        0
    } else if k >= f64::from(n) {
        n - 1
    } else {
        k as u32
    }
}

/// `+1` on the left half of the level-`j` tile containing `x`, `−1` on the right.
#[inline]
fn half_sign(x: f64, j: u32) -> f64 {
    if tile(x, j + 1).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn check_unit(t: [f64; 2]) -> Result<()> {
    if (0.0..=1.0).contains(&t[0]) && (0.0..=1.0).contains(&t[1]) {
        Ok(())
    } else {
        Err(Error::Domain {
            x: t[0],
            y: t[1],
            what: "unit square",
        })
    }
}

/// Evaluates a single atom at `t ∈ [0,1]²`.
pub fn eval_atom(idx: &WaveletIndex, t: [f64; 2]) -> Result<f64> {
    idx.check_shifts()?;
    check_unit(t)?;
    Ok(idx.value_unchecked(t))
}

/// Ordered Haar dictionary: scaling atoms at `j0`, then for each
/// `j = j0..j_max-1` the H, V and D families, each row-major in `(k1, k2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaarBasis {
    j0: u32,
    j_max: u32,
    atoms: Vec<WaveletIndex>,
}

impl HaarBasis {
    /// Builds the dictionary with coarse level `j0` and finest level `j_max`
    /// (exclusive). `j_max == j0` leaves only the scaling atoms.
    pub fn new(j0: u32, j_max: u32) -> Result<Self> {
        if j_max < j0 {
            return Err(Error::InvalidArgument(format!(
                "finest level J = {j_max} below coarse level j0 = {j0}"
            )));
        }
        if j_max > 10 {
            return Err(Error::InvalidArgument(format!("J = {j_max} is too fine")));
        }
        let side0 = 1u32 << j0;
        let mut atoms = Vec::with_capacity(4usize.pow(j_max));
        for k1 in 0..side0 {
            for k2 in 0..side0 {
                atoms.push(WaveletIndex::scaling(j0, k1, k2));
            }
        }
        for j in j0..j_max {
            let side = 1u32 << j;
            for o in Orientation::DETAILS {
                for k1 in 0..side {
                    for k2 in 0..side {
                        atoms.push(WaveletIndex::new(j, o, k1, k2));
                    }
                }
            }
        }
        Ok(Self { j0, j_max, atoms })
    }

    pub fn j0(&self) -> u32 {
        self.j0
    }

    pub fn j_max(&self) -> u32 {
        self.j_max
    }

    /// Total atom count `R`.
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[WaveletIndex] {
        &self.atoms
    }

    pub fn atom(&self, r: usize) -> Result<&WaveletIndex> {
        self.atoms
            .get(r)
            .ok_or_else(|| Error::IndexOutOfRange(format!("atom {r} of {}", self.atoms.len())))
    }

    /// Position of `idx` in the dictionary ordering.
    pub fn position(&self, idx: &WaveletIndex) -> Option<usize> {
        idx.check_shifts().ok()?;
        if idx.level < self.j0 || idx.level >= self.j_max.max(self.j0 + 1) {
            return None;
        }
        let side0 = 1usize << self.j0;
        match idx.orientation {
            Orientation::Scaling => {
                if idx.level != self.j0 {
                    return None;
                }
                Some(idx.k1 as usize * side0 + idx.k2 as usize)
            }
            o => {
                if idx.level >= self.j_max {
                    return None;
                }
                let mut offset = side0 * side0;
                for j in self.j0..idx.level {
                    offset += 3 * (1usize << (2 * j));
                }
                let side = 1usize << idx.level;
                let band = match o {
                    Orientation::H => 0,
                    Orientation::V => 1,
                    _ => 2,
                };
                Some(offset + band * side * side + idx.k1 as usize * side + idx.k2 as usize)
            }
        }
    }

    /// Visits the atoms that can be nonzero at `t` (one tile per level) as
    /// `(position, value)` pairs. Values may still be zero for none of them:
    /// Haar atoms never vanish inside their support.
    pub fn for_each_nonzero(&self, t: [f64; 2], mut f: impl FnMut(usize, f64)) {
        let side0 = 1usize << self.j0;
        let k1 = tile(t[0], self.j0) as usize;
        let k2 = tile(t[1], self.j0) as usize;
        f(k1 * side0 + k2, f64::from(1u32 << self.j0));
        let mut offset = side0 * side0;
        for j in self.j0..self.j_max {
            let side = 1usize << j;
            let k1 = tile(t[0], j) as usize;
            let k2 = tile(t[1], j) as usize;
            let scale = f64::from(1u32 << j);
            let sx = half_sign(t[0], j);
            let sy = half_sign(t[1], j);
            let cell = k1 * side + k2;
            f(offset + cell, scale * sx);
            f(offset + side * side + cell, scale * sy);
            f(offset + 2 * side * side + cell, scale * sx * sy);
            offset += 3 * side * side;
        }
    }

    /// Evaluates the full dictionary `Ψ̃(t)` (length `R`).
    pub fn eval_basis(&self, t: [f64; 2]) -> Result<Vec<f64>> {
        check_unit(t)?;
        let mut out = vec![0.0; self.len()];
        self.for_each_nonzero(t, |r, v| out[r] = v);
        Ok(out)
    }

    /// Stacks `eval_basis` rows into a `|points| × R` matrix.
    pub fn basis_matrix(&self, points: &[[f64; 2]], exec: Execution) -> Result<Array2<f64>> {
        for &t in points {
            check_unit(t)?;
        }
        let r = self.len();
        let mut data = vec![0.0; points.len() * r];
        par::fill_rows(exec, &mut data, r, |i, row| {
            self.for_each_nonzero(points[i], |k, v| row[k] = v);
        });
        Array2::from_shape_vec((points.len(), r), data).map_err(|e| Error::Dimension(e.to_string()))
    }

    /// `Σ_r coeffs[r] Ψ̃_r(t)`.
    pub fn reconstruct(&self, coeffs: &[f64], t: [f64; 2]) -> Result<f64> {
        if coeffs.len() != self.len() {
            return Err(Error::Dimension(format!("{} coefficients for {} atoms", coeffs.len(), self.len())));
        }
        check_unit(t)?;
        let mut acc = 0.0;
        self.for_each_nonzero(t, |r, v| acc += coeffs[r] * v);
        Ok(acc)
    }

    /// L2 projection coefficients of `f` by midpoint quadrature on an
    /// `n × n` grid. Exact for functions constant on a dyadic partition no
    /// finer than the grid, provided `n` is a multiple of `2^J`.
    pub fn project<F>(&self, n: usize, f: F) -> Vec<f64>
    where
        F: Fn([f64; 2]) -> f64,
    {
        let mut coeffs = vec![0.0; self.len()];
        let cell = 1.0 / n as f64;
        let area = cell * cell;
        for ix in 0..n {
            for iy in 0..n {
                let t = [(ix as f64 + 0.5) * cell, (iy as f64 + 0.5) * cell];
                let v = f(t) * area;
                if v != 0.0 {
                    self.for_each_nonzero(t, |r, a| coeffs[r] += v * a);
                }
            }
        }
        coeffs
    }

    /// Writes the dictionary as CSV `r,j,orientation,k1,k2` with 1-based `r`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "j", "orientation", "k1", "k2"])?;
        for (r, a) in self.atoms.iter().enumerate() {
            w.write_record([
                (r + 1).to_string(),
                a.level.to_string(),
                a.orientation.to_string(),
                a.k1.to_string(),
                a.k2.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<atom csv>", e))?;
        Ok(())
    }
}
