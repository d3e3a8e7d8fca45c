//! Uniform cubic B-splines in one direction.

use crate::error::{Error, Result};

pub const DEGREE: usize = 3;
/// Basis functions supported on one cell.
pub const LOCAL: usize = DEGREE + 1;

/// Values and first two derivatives of the four basis functions living on a
/// cell: `ders[k][r]` is the `k`-th derivative of local function `r`.
pub type LocalDers = [[f64; LOCAL]; 3];

/// Uniform cubic spline space on `[0, length]`.
///
/// Open directions use the clamped knot vector `0,0,0,0,h,…,L,L,L,L` and carry
/// `cells + 3` functions that interpolate at both ends. Periodic directions
/// use `cells` functions that wrap around; they need at least four cells so
/// that the four functions on any cell are distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct Spline1d {
    length: f64,
    cells: usize,
    periodic: bool,
    knots: Vec<f64>,
}

impl Spline1d {
    pub fn new(length: f64, cells: usize, periodic: bool) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Invalid(format!(
                "length must be positive, got {length}"
            )));
        }
        let min_cells = if periodic { 4 } else { 2 };
        if cells < min_cells {
            return Err(Error::Invalid(format!(
                "{} direction needs at least {min_cells} cells, got {cells}",
                if periodic { "periodic" } else { "open" }
            )));
        }
        let h = length / cells as f64;
        let knots = (0..cells + 2 * DEGREE + 1)
            .map(|j| {
                let t = j as f64 - DEGREE as f64;
                if periodic {
                    t * h
                } else if j <= DEGREE {
                    0.0
                } else if j >= cells + DEGREE {
                    length
                } else {
                    t * h
                }
            })
            .collect();
        Ok(Spline1d {
            length,
            cells,
            periodic,
            knots,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn periodic(&self) -> bool {
        self.periodic
    }

    pub fn cell_width(&self) -> f64 {
        self.length / self.cells as f64
    }

    pub fn num_basis(&self) -> usize {
        if self.periodic {
            self.cells
        } else {
            self.cells + DEGREE
        }
    }

    /// `[a, b]` of a cell.
    pub fn cell_bounds(&self, cell: usize) -> (f64, f64) {
        (self.knots[cell + DEGREE], self.knots[cell + DEGREE + 1])
    }

    /// Global index of local function `r` on `cell`.
    pub fn global_index(&self, cell: usize, r: usize) -> usize {
        if self.periodic {
            (cell + r) % self.cells
        } else {
            cell + r
        }
    }

    /// Cell containing `x`, with `x = length` assigned to the last cell.
    /// Periodic directions wrap `x` first.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let x = if self.periodic {
            x.rem_euclid(self.length)
        } else {
            x.clamp(0.0, self.length)
        };
        let c = ((x / self.cell_width()).floor() as usize).min(self.cells - 1);
        (c, x)
    }

    /// Derivatives up to second order of the four functions on `cell` at `x`.
    pub fn ders(&self, cell: usize, x: f64) -> LocalDers {
        ders_basis_funs(cell + DEGREE, x, &self.knots)
    }

    /// Value of the spline with coefficients `coef` (one per basis function) at `x`.
    pub fn eval(&self, coef: &[f64], x: f64) -> [f64; 3] {
        let (c, x) = self.locate(x);
        let d = self.ders(c, x);
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            for r in 0..LOCAL {
                *o += d[k][r] * coef[self.global_index(c, r)];
            }
        }
        out
    }
}

/// Basis function derivatives on knot span `span` (de Boor's triangular scheme).
fn ders_basis_funs(span: usize, x: f64, knots: &[f64]) -> LocalDers {
    const P: usize = DEGREE;
    const N: usize = 2;
    let mut ndu = [[0.0; P + 1]; P + 1];
    let mut left = [0.0; P + 1];
    let mut right = [0.0; P + 1];
    ndu[0][0] = 1.0;
    for j in 1..=P {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    let mut ders = [[0.0; P + 1]; N + 1];
    for j in 0..=P {
        ders[0][j] = ndu[j][P];
    }
    let mut a = [[0.0; P + 1]; 2];
    for r in 0..=P {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=N {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = P - k;
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if r as isize - 1 <= pk as isize {
                k - 1
            } else {
                P - r
            };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut factor = P as f64;
    for (k, row) in ders.iter_mut().enumerate().skip(1) {
        for v in row.iter_mut() {
            *v *= factor;
        }
        factor *= (P - k) as f64;
    }
    ders
}
