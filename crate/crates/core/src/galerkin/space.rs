//! Tensor-product spline space, cell quadrature and field evaluation.

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::tensor::{Mat, Ten3, Ten4};

use super::spline::{LocalDers, Spline1d, LOCAL};

/// Box `[0, L1] × … × [0, Ld]` with a cell count and periodicity per direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub lengths: Vec<f64>,
    pub cells: Vec<usize>,
    pub periodic: Vec<bool>,
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }
}

/// A face of the box: direction and whether it is the upper end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Side {
    pub dir: usize,
    pub upper: bool,
}

impl Side {
    /// `x1_min`, `x2_max`, …
    pub fn name(&self) -> String {
        format!(
            "x{}_{}",
            self.dir + 1,
            if self.upper { "max" } else { "min" }
        )
    }

    pub fn parse(s: &str) -> Option<Side> {
        let rest = s.strip_prefix('x')?;
        let (num, end) = rest.split_once('_')?;
        let dir = num.parse::<usize>().ok()?.checked_sub(1)?;
        let upper = match end {
            "min" => false,
            "max" => true,
            _ => return None,
        };
        Some(Side { dir, upper })
    }
}

/// Basis data at one quadrature point of a cell.
#[derive(Debug, Clone)]
pub struct PointBasis<const D: usize> {
    pub x: [f64; D],
    /// Quadrature weight including the cell Jacobian.
    pub weight: f64,
    pub value: Vec<f64>,
    pub grad: Vec<[f64; D]>,
    pub hess: Vec<[[f64; D]; D]>,
}

/// Global indices of the `4^D` functions on a cell and their data at every quadrature point.
#[derive(Debug, Clone)]
pub struct CellBasis<const D: usize> {
    pub cell: usize,
    pub index: Vec<usize>,
    pub points: Vec<PointBasis<D>>,
}

/// Cubic tensor-product spline space on a [`Grid`].
#[derive(Debug, Clone)]
pub struct SplineSpace<const D: usize> {
    grid: Grid,
    dirs: [Spline1d; D],
    rule: GaussLegendre,
    /// `tables[dir][cell][q]`: 1D derivatives at the `q`-th Gauss point.
    tables: [Vec<Vec<LocalDers>>; D],
}

impl<const D: usize> SplineSpace<D> {
    pub fn new(grid: &Grid, quad_points: usize) -> Result<Self> {
        if grid.dim() != D || grid.cells.len() != D || grid.periodic.len() != D {
            return Err(Error::Invalid(format!(
                "grid describes {} directions, expected {D}",
                grid.dim()
            )));
        }
        if quad_points < 1 {
            return Err(Error::Invalid("quadrature needs at least one point".into()));
        }
        let mut dirs = Vec::with_capacity(D);
        for k in 0..D {
            dirs.push(Spline1d::new(
                grid.lengths[k],
                grid.cells[k],
                grid.periodic[k],
            )?);
        }
        let dirs: [Spline1d; D] = dirs.try_into().expect("length checked");
        let rule = GaussLegendre::new(quad_points);
        let tables = std::array::from_fn(|k| {
            let s = &dirs[k];
            (0..s.cells())
                .map(|c| {
                    let (a, b) = s.cell_bounds(c);
                    rule.on_interval(a, b).map(|(x, _)| s.ders(c, x)).collect()
                })
                .collect()
        });
        Ok(SplineSpace {
            grid: grid.clone(),
            dirs,
            rule,
            tables,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn direction(&self, k: usize) -> &Spline1d {
        &self.dirs[k]
    }

    pub fn quad_points(&self) -> usize {
        self.rule.len()
    }

    /// Basis function counts per direction.
    pub fn shape(&self) -> [usize; D] {
        std::array::from_fn(|k| self.dirs[k].num_basis())
    }

    pub fn num_basis(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn num_cells(&self) -> usize {
        self.grid.cells.iter().product()
    }

    /// Flat index of a basis multi-index, last direction fastest.
    pub fn flat(&self, multi: [usize; D]) -> usize {
        let shape = self.shape();
        multi.iter().zip(shape).fold(0, |acc, (&m, n)| acc * n + m)
    }

    pub fn multi(&self, mut flat: usize) -> [usize; D] {
        let shape = self.shape();
        let mut m = [0; D];
        for k in (0..D).rev() {
            m[k] = flat % shape[k];
            flat /= shape[k];
        }
        m
    }

    fn cell_multi(&self, mut cell: usize) -> [usize; D] {
        let mut m = [0; D];
        for k in (0..D).rev() {
            m[k] = cell % self.grid.cells[k];
            cell /= self.grid.cells[k];
        }
        m
    }

    /// Global indices of the functions supported on `cell`, local index last-direction fastest.
    pub fn cell_indices(&self, cell: usize) -> Vec<usize> {
        let cm = self.cell_multi(cell);
        let n_local = LOCAL.pow(D as u32);
        (0..n_local)
            .map(|l| {
                let r = local_multi::<D>(l);
                self.flat(std::array::from_fn(|k| {
                    self.dirs[k].global_index(cm[k], r[k])
                }))
            })
            .collect()
    }

    /// Basis data on a cell at all quadrature points.
    pub fn cell_basis(&self, cell: usize) -> CellBasis<D> {
        let cm = self.cell_multi(cell);
        let nq = self.rule.len();
        let n_local = LOCAL.pow(D as u32);
        let local: Vec<[usize; D]> = (0..n_local).map(local_multi::<D>).collect();
        let bounds: [(f64, f64); D] = std::array::from_fn(|k| self.dirs[k].cell_bounds(cm[k]));
        let mapped: [Vec<(f64, f64)>; D] =
            std::array::from_fn(|k| self.rule.on_interval(bounds[k].0, bounds[k].1).collect());

        let mut points = Vec::with_capacity(nq.pow(D as u32));
        for qi in 0..nq.pow(D as u32) {
            let q = point_multi::<D>(qi, nq);
            let tab: [&LocalDers; D] = std::array::from_fn(|k| &self.tables[k][cm[k]][q[k]]);
            let x = std::array::from_fn(|k| mapped[k][q[k]].0);
            let weight = (0..D).map(|k| mapped[k][q[k]].1).product();
            let mut value = Vec::with_capacity(n_local);
            let mut grad = Vec::with_capacity(n_local);
            let mut hess = Vec::with_capacity(n_local);
            for r in &local {
                let (v, g, h) = tensor_ders(&tab, r);
                value.push(v);
                grad.push(g);
                hess.push(h);
            }
            points.push(PointBasis {
                x,
                weight,
                value,
                grad,
                hess,
            });
        }
        CellBasis {
            cell,
            index: self.cell_indices(cell),
            points,
        }
    }

    /// Basis data at an arbitrary point: `(global indices, values, grads, hessians)`.
    pub fn point_basis(&self, x: [f64; D]) -> (Vec<usize>, PointBasis<D>) {
        let mut cm = [0; D];
        let mut ders: [LocalDers; D] = [[[0.0; LOCAL]; 3]; D];
        for k in 0..D {
            let (c, xk) = self.dirs[k].locate(x[k]);
            cm[k] = c;
            ders[k] = self.dirs[k].ders(c, xk);
        }
        let tab: [&LocalDers; D] = std::array::from_fn(|k| &ders[k]);
        let n_local = LOCAL.pow(D as u32);
        let mut index = Vec::with_capacity(n_local);
        let mut value = Vec::with_capacity(n_local);
        let mut grad = Vec::with_capacity(n_local);
        let mut hess = Vec::with_capacity(n_local);
        for l in 0..n_local {
            let r = local_multi::<D>(l);
            index.push(self.flat(std::array::from_fn(|k| {
                self.dirs[k].global_index(cm[k], r[k])
            })));
            let (v, g, h) = tensor_ders(&tab, &r);
            value.push(v);
            grad.push(g);
            hess.push(h);
        }
        (
            index,
            PointBasis {
                x,
                weight: 0.0,
                value,
                grad,
                hess,
            },
        )
    }

    /// Basis functions whose index in direction `side.dir` is the first or last,
    /// i.e. the ones that do not vanish on that face.
    pub fn boundary_functions(&self, side: Side) -> Result<Vec<usize>> {
        self.check_side(side)?;
        let shape = self.shape();
        let fixed = if side.upper { shape[side.dir] - 1 } else { 0 };
        Ok((0..self.num_basis())
            .filter(|&a| self.multi(a)[side.dir] == fixed)
            .collect())
    }

    fn check_side(&self, side: Side) -> Result<()> {
        if side.dir >= D {
            return Err(Error::Invalid(format!(
                "side {} outside a {D}-dimensional grid",
                side.name()
            )));
        }
        if self.grid.periodic[side.dir] {
            return Err(Error::Invalid(format!(
                "side {} lies in a periodic direction",
                side.name()
            )));
        }
        Ok(())
    }

    /// `∫_Ω N_a` for every basis function.
    pub fn integrate_basis(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.num_basis()];
        for c in 0..self.num_cells() {
            let cb = self.cell_basis(c);
            for pt in &cb.points {
                for (l, &a) in cb.index.iter().enumerate() {
                    out[a] += pt.weight * pt.value[l];
                }
            }
        }
        out
    }

    /// `∫_Γ N_a` over a face for every basis function.
    pub fn integrate_basis_on_side(&self, side: Side) -> Result<Vec<f64>> {
        self.check_side(side)?;
        let mut out = vec![0.0; self.num_basis()];
        let normal = side.dir;
        let x_n = if side.upper {
            self.grid.lengths[normal]
        } else {
            0.0
        };
        let tangential: Vec<usize> = (0..D).filter(|&k| k != normal).collect();
        let mut face_cells = vec![0usize; tangential.len()];
        loop {
            // Gauss points on the face cell.
            let nq = self.rule.len();
            let npts = nq.pow(tangential.len() as u32);
            for qi in 0..npts {
                let mut x = [0.0; D];
                x[normal] = x_n;
                let mut w = 1.0;
                let mut rem = qi;
                for (t, &k) in tangential.iter().enumerate().rev() {
                    let q = rem % nq;
                    rem /= nq;
                    let (a, b) = self.dirs[k].cell_bounds(face_cells[t]);
                    let (xq, wq) = self.rule.on_interval(a, b).nth(q).expect("in range");
                    x[k] = xq;
                    w *= wq;
                }
                let (index, pb) = self.point_basis(x);
                for (l, &a) in index.iter().enumerate() {
                    out[a] += w * pb.value[l];
                }
            }
            // Next face cell.
            let mut t = tangential.len();
            loop {
                if t == 0 {
                    return Ok(out);
                }
                t -= 1;
                face_cells[t] += 1;
                if face_cells[t] < self.grid.cells[tangential[t]] {
                    break;
                }
                face_cells[t] = 0;
            }
        }
    }
}

fn local_multi<const D: usize>(mut l: usize) -> [usize; D] {
    let mut r = [0; D];
    for k in (0..D).rev() {
        r[k] = l % LOCAL;
        l /= LOCAL;
    }
    r
}

fn point_multi<const D: usize>(mut qi: usize, nq: usize) -> [usize; D] {
    let mut q = [0; D];
    for k in (0..D).rev() {
        q[k] = qi % nq;
        qi /= nq;
    }
    q
}

fn tensor_ders<const D: usize>(
    tab: &[&LocalDers; D],
    r: &[usize; D],
) -> (f64, [f64; D], [[f64; D]; D]) {
    let order = |k: usize, m: usize| tab[k][m][r[k]];
    let mut v = 1.0;
    for k in 0..D {
        v *= order(k, 0);
    }
    let g = std::array::from_fn(|i| (0..D).map(|k| order(k, usize::from(k == i))).product());
    let h = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            (0..D)
                .map(|k| order(k, usize::from(k == i) + usize::from(k == j)))
                .product()
        })
    });
    (v, g, h)
}

/// Values and derivatives of a vector field with `D` components per basis function.
#[derive(Debug, Clone, Copy)]
pub struct VectorAtPoint<const D: usize> {
    pub value: [f64; D],
    pub grad: Mat<D>,
    pub hess: Ten3<D>,
}

/// Values and derivatives of a matrix field with `D²` components per basis function.
#[derive(Debug, Clone, Copy)]
pub struct MatrixAtPoint<const D: usize> {
    pub value: Mat<D>,
    pub grad: Ten3<D>,
    pub hess: Ten4<D>,
}

/// Interpolates a vector field whose component `i` for basis function `a`
/// sits at `coef[a·stride + offset + i]`.
pub fn vector_at<const D: usize>(
    coef: &[f64],
    stride: usize,
    offset: usize,
    index: &[usize],
    pb: &PointBasis<D>,
) -> VectorAtPoint<D> {
    let mut out = VectorAtPoint {
        value: [0.0; D],
        grad: Mat::zeros(),
        hess: Ten3::zeros(),
    };
    for (l, &a) in index.iter().enumerate() {
        let (n, dn, d2n) = (pb.value[l], &pb.grad[l], &pb.hess[l]);
        for i in 0..D {
            let c = coef[a * stride + offset + i];
            if c == 0.0 {
                continue;
            }
            out.value[i] += c * n;
            for j in 0..D {
                out.grad.0[i][j] += c * dn[j];
                for k in 0..D {
                    out.hess.0[i][j][k] += c * d2n[j][k];
                }
            }
        }
    }
    out
}

/// Interpolates a matrix field whose entry `(i, j)` for basis function `a`
/// sits at `coef[a·stride + offset + i·D + j]`.
pub fn matrix_at<const D: usize>(
    coef: &[f64],
    stride: usize,
    offset: usize,
    index: &[usize],
    pb: &PointBasis<D>,
) -> MatrixAtPoint<D> {
    let mut out = MatrixAtPoint {
        value: Mat::zeros(),
        grad: Ten3::zeros(),
        hess: Ten4::zeros(),
    };
    for (l, &a) in index.iter().enumerate() {
        let (n, dn, d2n) = (pb.value[l], &pb.grad[l], &pb.hess[l]);
        for i in 0..D {
            for j in 0..D {
                let c = coef[a * stride + offset + i * D + j];
                if c == 0.0 {
                    continue;
                }
                out.value.0[i][j] += c * n;
                for k in 0..D {
                    out.grad.0[i][j][k] += c * dn[k];
                    for m in 0..D {
                        out.hess.0[i][j][k][m] += c * d2n[k][m];
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2(cells: [usize; 2], periodic: [bool; 2]) -> Grid {
        Grid {
            lengths: vec![1.0, 2.0],
            cells: cells.to_vec(),
            periodic: periodic.to_vec(),
        }
    }

    #[test]
    fn counts_and_indexing() {
        let s = SplineSpace::<2>::new(&grid2([4, 3], [true, false]), 4).unwrap();
        assert_eq!(s.shape(), [4, 6]);
        assert_eq!(s.num_basis(), 24);
        for a in 0..24 {
            assert_eq!(s.flat(s.multi(a)), a);
        }
        let idx = s.cell_indices(11);
        let mut sorted = idx.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 16);
    }

    #[test]
    fn basis_integrates_to_volume() {
        let s = SplineSpace::<2>::new(&grid2([4, 3], [true, false]), 4).unwrap();
        let total: f64 = s.integrate_basis().iter().sum();
        assert!((total - 2.0).abs() < 1e-13);
        let top: f64 = s
            .integrate_basis_on_side(Side {
                dir: 1,
                upper: true,
            })
            .unwrap()
            .iter()
            .sum();
        assert!((top - 1.0).abs() < 1e-13);
    }

    #[test]
    fn side_names_roundtrip() {
        for dir in 0..3 {
            for upper in [false, true] {
                let s = Side { dir, upper };
                assert_eq!(Side::parse(&s.name()), Some(s));
            }
        }
        assert_eq!(Side::parse("x0_min"), None);
        assert_eq!(Side::parse("y1_max"), None);
    }

    #[test]
    fn periodic_side_rejected() {
        let s = SplineSpace::<2>::new(&grid2([4, 3], [true, false]), 4).unwrap();
        assert!(s
            .boundary_functions(Side {
                dir: 0,
                upper: false
            })
            .is_err());
        assert_eq!(
            s.boundary_functions(Side {
                dir: 1,
                upper: false
            })
            .unwrap()
            .len(),
            4
        );
    }

    #[test]
    fn wrong_dimension_rejected() {
        assert!(SplineSpace::<3>::new(&grid2([4, 3], [true, false]), 4).is_err());
    }
}
