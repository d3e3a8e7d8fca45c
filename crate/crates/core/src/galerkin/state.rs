//! Evolution state and per-step reports.

use crate::constitutive::EnergyBreakdown;

/// Spline coefficients of the fields at time `t`.
///
/// The deformation is stored as a displacement, `y(x) = x + Σ_a u_coef[a] N_a(x)`,
/// so that periodic directions carry periodic coefficients. Layouts are
/// `u_coef[a·d + i]`, `v_coef[a·d + i]` and `p_coef[a·d² + i·d + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub u_coef: Vec<f64>,
    pub v_coef: Vec<f64>,
    pub p_coef: Vec<f64>,
}

impl SystemState {
    /// `y = id`, `v = 0`, `Π = I`.
    pub fn reference(num_basis: usize, d: usize) -> Self {
        let mut p_coef = vec![0.0; num_basis * d * d];
        for a in 0..num_basis {
            for i in 0..d {
                p_coef[a * d * d + i * d + i] = 1.0;
            }
        }
        SystemState {
            t: 0.0,
            u_coef: vec![0.0; num_basis * d],
            v_coef: vec![0.0; num_basis * d],
            p_coef,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u_coef
            .iter()
            .chain(&self.v_coef)
            .chain(&self.p_coef)
            .all(|v| v.is_finite())
    }

    /// Largest coefficient difference over all three fields.
    pub fn max_abs_diff(&self, other: &SystemState) -> f64 {
        let pairs = [
            (&self.u_coef, &other.u_coef),
            (&self.v_coef, &other.v_coef),
            (&self.p_coef, &other.p_coef),
        ];
        pairs
            .iter()
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Cumulative dissipation and external work since the start of a run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyAccount {
    /// Total energy (kinetic + stored) at the start of the run.
    pub initial_total: f64,
    pub dissipated_kv: f64,
    pub dissipated_m: f64,
    pub dissipated_h: f64,
    pub external_work: f64,
}

impl EnergyAccount {
    pub fn starting_from(initial: &EnergyBreakdown) -> Self {
        EnergyAccount {
            initial_total: initial.total(),
            ..Default::default()
        }
    }

    /// Fills the cumulative fields of `energy` and returns the balance residual
    /// `|E(t) + D(0,t) − E(0) − W(0,t)|`.
    pub fn close(&self, energy: &mut EnergyBreakdown) -> f64 {
        energy.dissipated_kv = self.dissipated_kv;
        energy.dissipated_m = self.dissipated_m;
        energy.dissipated_h = self.dissipated_h;
        energy.external_work = self.external_work;
        (energy.total() + energy.dissipated() - self.initial_total - self.external_work).abs()
    }
}

/// Determinant minima over all quadrature points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Determinants {
    pub min_det_p: f64,
    pub min_det_grad_y: f64,
    pub min_det_f_el: f64,
}

/// Outcome of one accepted time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub t: f64,
    pub dt: f64,
    pub newton_iters: usize,
    /// Residual max-norm at the predictor, before any Newton update.
    pub initial_residual: f64,
    pub residual_norm: f64,
    pub min_det_p: f64,
    pub min_det_grad_y: f64,
    pub energy: EnergyBreakdown,
    pub balance_residual: f64,
}
