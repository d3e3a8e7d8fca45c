//! Discrete residual of the backward-Euler system, its Jacobian, energies and
//! determinant monitors.
//!
//! Newton unknowns are packed per basis function as
//! `z[a·B + i] = u_a,i` and `z[a·B + d + i·d + j] = Π_a,ij` with `B = d + d²`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::constitutive::{
    cel_rate, fe_eval, fg_eval, fh_eval, EnergyBreakdown, Kinematics, MaterialParams, QuadState,
};
use crate::error::{Error, Result};
use crate::tensor::Mat;
use crate::weakform::PointKernel;

use super::loads::Loads;
use super::space::{
    matrix_at, vector_at, CellBasis, MatrixAtPoint, PointBasis, SplineSpace, VectorAtPoint,
};
use super::state::{Determinants, SystemState};

/// Whether inertia is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Dynamic,
    /// `ρ = 0`: the momentum balance is an equilibrium at every step.
    QuasiStatic,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Dynamic => "dynamic",
            Mode::QuasiStatic => "quasi_static",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Newton stops when the free-dof residual max-norm is below `tol·(1 + |loads|)`.
    pub tol: f64,
    pub max_iters: usize,
    /// Line-search halvings per Newton update.
    pub max_halvings: usize,
    /// Lower bound enforced on `det Π` and `det ∇y` at every quadrature point.
    pub det_threshold: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-10,
            max_iters: 25,
            max_halvings: 8,
            det_threshold: 1e-6,
        }
    }
}

/// Unknowns per basis function.
pub const fn block(d: usize) -> usize {
    d + d * d
}

/// Prescribed displacement component.
#[derive(Debug, Clone, Copy)]
struct DirichletDof {
    /// Index into the packed unknowns.
    dof: usize,
    load: usize,
    comp: usize,
}

/// Previous state and step size for one backward-Euler step.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub prev: &'a SystemState,
    pub dt: f64,
}

impl StepContext<'_> {
    pub fn t_new(&self) -> f64 {
        self.prev.t + self.dt
    }
}

/// Everything needed to evaluate the discrete system.
#[derive(Debug, Clone)]
pub struct Problem<const D: usize> {
    pub space: SplineSpace<D>,
    pub params: MaterialParams,
    pub mode: Mode,
    pub loads: Loads,
    pub settings: SolverSettings,
    body_integral: Vec<f64>,
    traction_integrals: Vec<Vec<f64>>,
    dirichlet: Vec<DirichletDof>,
    free: Vec<usize>,
    free_of: Vec<Option<usize>>,
}

/// Fields of the previous state at one quadrature point.
#[derive(Debug, Clone, Copy)]
struct PrevAtPoint<const D: usize> {
    u: VectorAtPoint<D>,
    v: [f64; D],
    p: MatrixAtPoint<D>,
}

/// Element contribution: local residual and optionally the local Jacobian (row-major).
struct Element {
    residual: Vec<f64>,
    jacobian: Option<Vec<f64>>,
}

impl<const D: usize> Problem<D> {
    pub fn new(
        space: SplineSpace<D>,
        params: MaterialParams,
        mode: Mode,
        loads: Loads,
        settings: SolverSettings,
    ) -> Result<Self> {
        let nb = space.num_basis();
        let b = block(D);
        let check_len = |what: &str, v: &[f64]| {
            if v.len() == D {
                Ok(())
            } else {
                Err(Error::Invalid(format!(
                    "{what} has {} components, expected {D}",
                    v.len()
                )))
            }
        };
        let body_integral = match &loads.body_force {
            Some(f) => {
                check_len("body force", &f.vector)?;
                space.integrate_basis()
            }
            None => vec![0.0; nb],
        };
        let mut traction_integrals = Vec::with_capacity(loads.traction.len());
        for (side, g) in &loads.traction {
            check_len(&format!("traction on {}", side.name()), &g.vector)?;
            traction_integrals.push(space.integrate_basis_on_side(*side)?);
        }
        // Later entries override earlier ones on shared edges.
        let mut owner: Vec<Option<usize>> = vec![None; nb];
        for (k, (side, g)) in loads.dirichlet.iter().enumerate() {
            check_len(&format!("displacement on {}", side.name()), &g.vector)?;
            for a in space.boundary_functions(*side)? {
                owner[a] = Some(k);
            }
        }
        let mut dirichlet = Vec::new();
        let mut free_of = vec![None; nb * b];
        let mut free = Vec::new();
        for a in 0..nb {
            for c in 0..b {
                let dof = a * b + c;
                match owner[a] {
                    Some(load) if c < D => dirichlet.push(DirichletDof { dof, load, comp: c }),
                    _ => {
                        free_of[dof] = Some(free.len());
                        free.push(dof);
                    }
                }
            }
        }
        Ok(Problem {
            space,
            params,
            mode,
            loads,
            settings,
            body_integral,
            traction_integrals,
            dirichlet,
            free,
            free_of,
        })
    }

    pub fn num_dofs(&self) -> usize {
        self.space.num_basis() * block(D)
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    /// Packed indices of prescribed displacement components.
    pub fn constrained_dofs(&self) -> Vec<usize> {
        self.dirichlet.iter().map(|c| c.dof).collect()
    }

    fn density(&self) -> f64 {
        match self.mode {
            Mode::Dynamic => self.params.rho,
            Mode::QuasiStatic => 0.0,
        }
    }

    pub fn pack(&self, u: &[f64], p: &[f64]) -> Vec<f64> {
        let b = block(D);
        let mut z = vec![0.0; self.num_dofs()];
        for a in 0..self.space.num_basis() {
            z[a * b..a * b + D].copy_from_slice(&u[a * D..(a + 1) * D]);
            z[a * b + D..(a + 1) * b].copy_from_slice(&p[a * D * D..(a + 1) * D * D]);
        }
        z
    }

    pub fn unpack(&self, z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let b = block(D);
        let nb = self.space.num_basis();
        let mut u = vec![0.0; nb * D];
        let mut p = vec![0.0; nb * D * D];
        for a in 0..nb {
            u[a * D..(a + 1) * D].copy_from_slice(&z[a * b..a * b + D]);
            p[a * D * D..(a + 1) * D * D].copy_from_slice(&z[a * b + D..(a + 1) * b]);
        }
        (u, p)
    }

    /// Prescribed displacement components at time `t`, as `(packed dof, value)`.
    pub fn dirichlet_values(&self, t: f64) -> Vec<(usize, f64)> {
        let values: Vec<Vec<f64>> = self.loads.dirichlet.iter().map(|(_, g)| g.at(t)).collect();
        self.dirichlet
            .iter()
            .map(|c| (c.dof, values[c.load][c.comp]))
            .collect()
    }

    pub fn apply_dirichlet(&self, z: &mut [f64], t: f64) {
        for (dof, v) in self.dirichlet_values(t) {
            z[dof] = v;
        }
    }

    /// Load vector `(f, N_a e_i) + (g, N_a e_i)_Γ` at time `t`, packed.
    pub fn external_force(&self, t: f64) -> Vec<f64> {
        let b = block(D);
        let mut out = vec![0.0; self.num_dofs()];
        if let Some(f) = &self.loads.body_force {
            let fv = f.at(t);
            for (a, w) in self.body_integral.iter().enumerate() {
                for i in 0..D {
                    out[a * b + i] += fv[i] * w;
                }
            }
        }
        for ((_, g), integral) in self.loads.traction.iter().zip(&self.traction_integrals) {
            let gv = g.at(t);
            for (a, w) in integral.iter().enumerate() {
                for i in 0..D {
                    out[a * b + i] += gv[i] * w;
                }
            }
        }
        out
    }

    fn prev_fields(&self, cb: &CellBasis<D>, prev: &SystemState) -> Vec<PrevAtPoint<D>> {
        cb.points
            .iter()
            .map(|pb| PrevAtPoint {
                u: vector_at(&prev.u_coef, D, 0, &cb.index, pb),
                v: vector_at(&prev.v_coef, D, 0, &cb.index, pb).value,
                p: matrix_at(&prev.p_coef, D * D, 0, &cb.index, pb),
            })
            .collect()
    }

    /// Quadrature state and acceleration from new and previous fields.
    fn point_state(
        &self,
        u: &VectorAtPoint<D>,
        p: &MatrixAtPoint<D>,
        prev: &PrevAtPoint<D>,
        dt: f64,
    ) -> (QuadState<D>, [f64; D]) {
        let inv_dt = 1.0 / dt;
        let accel =
            std::array::from_fn(|i| ((u.value[i] - prev.u.value[i]) * inv_dt - prev.v[i]) * inv_dt);
        let q = QuadState {
            grad_y: Mat::identity() + u.grad,
            grad2_y: u.hess,
            p: p.value,
            grad_p: p.grad,
            grad2_p: p.hess,
            rate_grad_y: (u.grad - prev.u.grad) * inv_dt,
            rate_p: (p.value - prev.p.value) * inv_dt,
            rate_grad2_p: (p.hess - prev.p.hess) * inv_dt,
        };
        (q, accel)
    }

    /// Adds `w·(kernel pairing with every local test function)` to `r`.
    fn add_point(
        &self,
        r: &mut [f64],
        pb: &PointBasis<D>,
        k: &PointKernel<D>,
        rho_accel: &[f64; D],
    ) {
        let b = block(D);
        let w = pb.weight;
        for l in 0..pb.value.len() {
            let (n, dn, d2n) = (pb.value[l], &pb.grad[l], &pb.hess[l]);
            let base = l * b;
            for i in 0..D {
                let mut s = rho_accel[i] * n;
                for m in 0..D {
                    s += k.mom_grad.0[i][m] * dn[m];
                    for c in 0..D {
                        s += k.mom_hess.0[i][m][c] * d2n[m][c];
                    }
                }
                r[base + i] += w * s;
            }
            for i in 0..D {
                for j in 0..D {
                    let mut s = k.flow_val.0[i][j] * n;
                    for c in 0..D {
                        s += k.flow_grad.0[i][j][c] * dn[c];
                        for e in 0..D {
                            s += k.flow_hess.0[i][j][c][e] * d2n[c][e];
                        }
                    }
                    r[base + D + i * D + j] += w * s;
                }
            }
        }
    }

    fn kernel_at(&self, q: &QuadState<D>, cell: usize, point: usize) -> Result<PointKernel<D>> {
        PointKernel::new(q, &self.params).map_err(|e| locate_error(e, q, cell, point))
    }

    fn element(
        &self,
        cell: usize,
        z: &[f64],
        ctx: &StepContext,
        with_jacobian: bool,
    ) -> Result<Element> {
        let b = block(D);
        let cb = self.space.cell_basis(cell);
        let n_local = cb.index.len() * b;
        let prev = self.prev_fields(&cb, ctx.prev);
        let rho = self.density();
        let dt = ctx.dt;

        let mut residual = vec![0.0; n_local];
        let mut base_fields = Vec::with_capacity(cb.points.len());
        for (qi, pb) in cb.points.iter().enumerate() {
            let u = vector_at(z, b, 0, &cb.index, pb);
            let p = matrix_at(z, b, D, &cb.index, pb);
            let (q, accel) = self.point_state(&u, &p, &prev[qi], dt);
            let k = self.kernel_at(&q, cell, qi)?;
            self.add_point(&mut residual, pb, &k, &accel.map(|a| rho * a));
            base_fields.push((u, p));
        }
        if !with_jacobian {
            return Ok(Element {
                residual,
                jacobian: None,
            });
        }

        // Forward differences, one local unknown at a time. A perturbation of
        // coefficient (l, c) shifts the interpolated fields by h times the
        // basis data of function l, so fields are updated in place.
        let mut jac = vec![0.0; n_local * n_local];
        let mut col = vec![0.0; n_local];
        for l in 0..cb.index.len() {
            for c in 0..b {
                let coef = z[cb.index[l] * b + c];
                let h = 1e-7 * (1.0 + coef.abs());
                col.iter_mut().for_each(|v| *v = 0.0);
                for (qi, pb) in cb.points.iter().enumerate() {
                    let (mut u, mut p) = base_fields[qi];
                    let (n, dn, d2n) = (pb.value[l], pb.grad[l], pb.hess[l]);
                    if c < D {
                        u.value[c] += h * n;
                        for m in 0..D {
                            u.grad.0[c][m] += h * dn[m];
                            for e in 0..D {
                                u.hess.0[c][m][e] += h * d2n[m][e];
                            }
                        }
                    } else {
                        let (i, j) = ((c - D) / D, (c - D) % D);
                        p.value.0[i][j] += h * n;
                        for m in 0..D {
                            p.grad.0[i][j][m] += h * dn[m];
                            for e in 0..D {
                                p.hess.0[i][j][m][e] += h * d2n[m][e];
                            }
                        }
                    }
                    let (q, accel) = self.point_state(&u, &p, &prev[qi], dt);
                    let k = self.kernel_at(&q, cell, qi)?;
                    self.add_point(&mut col, pb, &k, &accel.map(|a| rho * a));
                }
                let j_col = l * b + c;
                for row in 0..n_local {
                    jac[row * n_local + j_col] = (col[row] - residual[row]) / h;
                }
            }
        }
        Ok(Element {
            residual,
            jacobian: Some(jac),
        })
    }

    /// Element contributions for all cells, computed in parallel and returned in cell order.
    fn elements(&self, z: &[f64], ctx: &StepContext, with_jacobian: bool) -> Result<Vec<Element>> {
        let results: Vec<Result<Element>> = (0..self.space.num_cells())
            .into_par_iter()
            .map(|c| self.element(c, z, ctx, with_jacobian))
            .collect();
        results.into_iter().collect()
    }

    /// Unconstrained residual `ρ(v̇, ỹ) + a(z; ỹ, Π̃) − ℓ(t; ỹ)` for every packed unknown.
    pub fn raw_residual(&self, z: &[f64], ctx: &StepContext) -> Result<Vec<f64>> {
        let b = block(D);
        let mut r = self.external_force(ctx.t_new());
        r.iter_mut().for_each(|v| *v = -*v);
        for (cell, el) in self.elements(z, ctx, false)?.into_iter().enumerate() {
            let index = self.space.cell_indices(cell);
            scatter_vec(&mut r, &el.residual, &index, b);
        }
        Ok(r)
    }

    /// Residual with prescribed rows replaced by `z_j − g_j(t)`.
    pub fn assemble_residual(&self, z: &[f64], ctx: &StepContext) -> Result<Vec<f64>> {
        let mut r = self.raw_residual(z, ctx)?;
        for (dof, v) in self.dirichlet_values(ctx.t_new()) {
            r[dof] = z[dof] - v;
        }
        Ok(r)
    }

    /// Raw residual and the Jacobian restricted to free unknowns.
    pub fn residual_and_jacobian(
        &self,
        z: &[f64],
        ctx: &StepContext,
    ) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let b = block(D);
        let nf = self.free.len();
        let mut r = self.external_force(ctx.t_new());
        r.iter_mut().for_each(|v| *v = -*v);
        let mut jac = DMatrix::<f64>::zeros(nf, nf);
        for (cell, el) in self.elements(z, ctx, true)?.into_iter().enumerate() {
            let index = self.space.cell_indices(cell);
            scatter_vec(&mut r, &el.residual, &index, b);
            let local = el.jacobian.expect("requested");
            let n_local = index.len() * b;
            let map: Vec<Option<usize>> = (0..n_local)
                .map(|lc| self.free_of[index[lc / b] * b + lc % b])
                .collect();
            for (row, fr) in map.iter().enumerate() {
                let Some(fr) = *fr else { continue };
                for (colm, fc) in map.iter().enumerate() {
                    if let Some(fc) = *fc {
                        jac[(fr, fc)] += local[row * n_local + colm];
                    }
                }
            }
        }
        Ok((r, jac))
    }

    /// Stored and kinetic energy of a state (cumulative fields left at zero).
    pub fn energies(&self, state: &SystemState) -> Result<EnergyBreakdown> {
        let parts: Vec<Result<[f64; 4]>> = (0..self.space.num_cells())
            .into_par_iter()
            .map(|cell| {
                let cb = self.space.cell_basis(cell);
                let mut acc = [0.0; 4];
                for (qi, pb) in cb.points.iter().enumerate() {
                    let (q, v) = self.static_state(state, &cb.index, pb);
                    let k = Kinematics::new(&q).map_err(|e| locate_error(e, &q, cell, qi))?;
                    let w = pb.weight;
                    acc[0] += w * v.iter().map(|x| x * x).sum::<f64>();
                    acc[1] += w * fe_eval(&k.f_el, &self.params);
                    acc[2] += w * fh_eval(&q.p, &self.params);
                    acc[3] += w * fg_eval(&k.grad_f_el, &self.params);
                }
                Ok(acc)
            })
            .collect();
        let mut e = EnergyBreakdown::default();
        for part in parts {
            let [kin, el, con, gr] = part?;
            e.kinetic += kin;
            e.elastic += el;
            e.constraint += con;
            e.gradient += gr;
        }
        e.kinetic *= 0.5 * self.density();
        Ok(e)
    }

    fn static_state(
        &self,
        state: &SystemState,
        index: &[usize],
        pb: &PointBasis<D>,
    ) -> (QuadState<D>, [f64; D]) {
        let u = vector_at(&state.u_coef, D, 0, index, pb);
        let p = matrix_at(&state.p_coef, D * D, 0, index, pb);
        let v = vector_at(&state.v_coef, D, 0, index, pb).value;
        let mut q = QuadState::reference();
        q.grad_y = Mat::identity() + u.grad;
        q.grad2_y = u.hess;
        q.p = p.value;
        q.grad_p = p.grad;
        q.grad2_p = p.hess;
        (q, v)
    }

    /// `dt·∫(ν_kv|Ċ_el|², ν_m|Π̇|², ν_h|∇²Π̇|²)` for the step `prev → new`, rates at the new time.
    pub fn step_dissipation(
        &self,
        new: &SystemState,
        prev: &SystemState,
        dt: f64,
    ) -> Result<[f64; 3]> {
        let b = block(D);
        let z = self.pack(&new.u_coef, &new.p_coef);
        let ctx = StepContext { prev, dt };
        let parts: Vec<Result<[f64; 3]>> = (0..self.space.num_cells())
            .into_par_iter()
            .map(|cell| {
                let cb = self.space.cell_basis(cell);
                let prev_f = self.prev_fields(&cb, ctx.prev);
                let mut acc = [0.0; 3];
                for (qi, pb) in cb.points.iter().enumerate() {
                    let u = vector_at(&z, b, 0, &cb.index, pb);
                    let p = matrix_at(&z, b, D, &cb.index, pb);
                    let (q, _) = self.point_state(&u, &p, &prev_f[qi], dt);
                    let c_rate = cel_rate(&q).map_err(|e| locate_error(e, &q, cell, qi))?;
                    acc[0] += pb.weight * self.params.nu_kv * c_rate.norm_sq();
                    acc[1] += pb.weight * self.params.nu_m * q.rate_p.norm_sq();
                    acc[2] += pb.weight * self.params.nu_h * q.rate_grad2_p.norm_sq();
                }
                Ok(acc)
            })
            .collect();
        let mut total = [0.0; 3];
        for part in parts {
            let part = part?;
            for k in 0..3 {
                total[k] += part[k];
            }
        }
        Ok(total.map(|v| v * dt))
    }

    /// Minima of `det Π`, `det ∇y` and `det F_el` over all quadrature points.
    pub fn monitor_determinants(&self, state: &SystemState) -> Determinants {
        monitor_determinants(&self.space, state)
    }
}

/// Minima of `det Π`, `det ∇y` and `det F_el` over all quadrature points.
pub fn monitor_determinants<const D: usize>(
    space: &SplineSpace<D>,
    state: &SystemState,
) -> Determinants {
    let parts: Vec<[f64; 3]> = (0..space.num_cells())
        .into_par_iter()
        .map(|cell| {
            let cb = space.cell_basis(cell);
            let mut m = [f64::INFINITY; 3];
            for pb in &cb.points {
                let grad_u = vector_at(&state.u_coef, D, 0, &cb.index, pb).grad;
                let p = matrix_at(&state.p_coef, D * D, 0, &cb.index, pb).value;
                let dp = p.det();
                let dy = (Mat::identity() + grad_u).det();
                m[0] = m[0].min(dp);
                m[1] = m[1].min(dy);
                m[2] = m[2].min(dy / dp);
            }
            m
        })
        .collect();
    let m = parts.iter().fold([f64::INFINITY; 3], |acc, p| {
        [acc[0].min(p[0]), acc[1].min(p[1]), acc[2].min(p[2])]
    });
    Determinants {
        min_det_p: m[0],
        min_det_grad_y: m[1],
        min_det_f_el: m[2],
    }
}

fn scatter_vec(r: &mut [f64], local: &[f64], index: &[usize], b: usize) {
    for (l, &a) in index.iter().enumerate() {
        for c in 0..b {
            r[a * b + c] += local[l * b + c];
        }
    }
}

fn locate_error<const D: usize>(e: Error, q: &QuadState<D>, cell: usize, point: usize) -> Error {
    match e {
        Error::NonPositiveDeterminant { det } | Error::SingularMatrix { det } => {
            let field = if q.p.det() <= 0.0 { "P" } else { "grad_y" };
            Error::NonPositiveDeterminantAt {
                field,
                det,
                cell,
                point,
            }
        }
        other => other,
    }
}
