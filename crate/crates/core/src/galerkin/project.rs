//! L² projection of analytic fields onto the spline space.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::Mat;

use super::assembly::monitor_determinants;
use super::space::SplineSpace;
use super::state::SystemState;

/// Consistent mass matrix `∫ N_a N_b`.
pub fn mass_matrix<const D: usize>(space: &SplineSpace<D>) -> DMatrix<f64> {
    let nb = space.num_basis();
    let mut m = DMatrix::zeros(nb, nb);
    for c in 0..space.num_cells() {
        let cb = space.cell_basis(c);
        for pb in &cb.points {
            for (l, &a) in cb.index.iter().enumerate() {
                let wa = pb.weight * pb.value[l];
                for (k, &b) in cb.index.iter().enumerate() {
                    m[(a, b)] += wa * pb.value[k];
                }
            }
        }
    }
    m
}

/// Coefficients (`a·ncomp + c`) of the L² projection of `f`, which writes
/// `ncomp` values at a point into its output slice.
pub fn l2_project<const D: usize>(
    space: &SplineSpace<D>,
    ncomp: usize,
    f: impl Fn([f64; D], &mut [f64]),
) -> Result<Vec<f64>> {
    let nb = space.num_basis();
    let mut rhs = DMatrix::zeros(nb, ncomp);
    let mut val = vec![0.0; ncomp];
    for c in 0..space.num_cells() {
        let cb = space.cell_basis(c);
        for pb in &cb.points {
            f(pb.x, &mut val);
            for (l, &a) in cb.index.iter().enumerate() {
                let w = pb.weight * pb.value[l];
                for (k, v) in val.iter().enumerate() {
                    rhs[(a, k)] += w * v;
                }
            }
        }
    }
    let chol = mass_matrix(space)
        .cholesky()
        .ok_or_else(|| Error::Invalid("mass matrix is not positive definite".into()))?;
    let sol = chol.solve(&rhs);
    let mut out = vec![0.0; nb * ncomp];
    for a in 0..nb {
        for k in 0..ncomp {
            out[a * ncomp + k] = sol[(a, k)];
        }
    }
    Ok(out)
}

/// Projects `y0`, `v0` and `Π0` and checks `det Π, det ∇y ≥ det_threshold`.
///
/// The deformation is projected as the displacement `y0(x) − x`.
pub fn project_initial<const D: usize>(
    space: &SplineSpace<D>,
    y0: impl Fn([f64; D]) -> [f64; D],
    v0: impl Fn([f64; D]) -> [f64; D],
    p0: impl Fn([f64; D]) -> Mat<D>,
    det_threshold: f64,
) -> Result<SystemState> {
    let u_coef = l2_project(space, D, |x, out| {
        let y = y0(x);
        for i in 0..D {
            out[i] = y[i] - x[i];
        }
    })?;
    let v_coef = l2_project(space, D, |x, out| out.copy_from_slice(&v0(x)))?;
    let p_coef = l2_project(space, D * D, |x, out| {
        let p = p0(x);
        for i in 0..D {
            for j in 0..D {
                out[i * D + j] = p.0[i][j];
            }
        }
    })?;
    let state = SystemState {
        t: 0.0,
        u_coef: clean(u_coef),
        v_coef: clean(v_coef),
        p_coef: clean(p_coef),
    };
    let dets = monitor_determinants(space, &state);
    if !(dets.min_det_p >= det_threshold && dets.min_det_grad_y >= det_threshold) {
        return Err(Error::ProjectionViolatesDeterminant {
            min_det_p: dets.min_det_p,
            min_det_grad_y: dets.min_det_grad_y,
        });
    }
    Ok(state)
}

/// Rounds projection noise on exactly representable data: values within
/// `1e-14` of an integer are snapped to it, so the reference state is exact.
fn clean(mut v: Vec<f64>) -> Vec<f64> {
    for x in &mut v {
        let r = x.round();
        if (*x - r).abs() < 1e-14 {
            *x = r;
        }
    }
    v
}
