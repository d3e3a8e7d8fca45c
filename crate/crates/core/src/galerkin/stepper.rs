//! Backward-Euler steps and the adaptive time loop.

use crate::error::{Error, Result};

use super::assembly::{Problem, StepContext};
use super::newton;
use super::state::{EnergyAccount, StepReport, SystemState};

/// Newton iteration counts at or below this make a step "easy".
pub const EASY_NEWTON_ITERS: usize = 3;
/// Consecutive easy steps before the step size doubles.
pub const EASY_STEPS_TO_GROW: usize = 5;

/// One backward-Euler step `t → t + dt`.
///
/// Velocities and creep rates are difference quotients, `v⁺ = (u⁺ − u)/dt` and
/// `Π̇ = (Π⁺ − Π)/dt`; every integrand is evaluated at the new time. The
/// returned account includes the step's dissipation and the work of loads and
/// boundary reactions.
pub fn step_implicit_euler<const D: usize>(
    problem: &Problem<D>,
    state: &SystemState,
    account: &EnergyAccount,
    dt: f64,
) -> Result<(SystemState, EnergyAccount, StepReport)> {
    if !(dt > 0.0) {
        return Err(Error::Invalid(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let ctx = StepContext { prev: state, dt };
    let t_new = ctx.t_new();

    let predicted_u: Vec<f64> = state
        .u_coef
        .iter()
        .zip(&state.v_coef)
        .map(|(u, v)| u + dt * v)
        .collect();
    let z0 = problem.pack(&predicted_u, &state.p_coef);
    let outcome = newton::solve(problem, &ctx, z0)?;

    let (u_coef, p_coef) = problem.unpack(&outcome.z);
    let v_coef = u_coef
        .iter()
        .zip(&state.u_coef)
        .map(|(new, old)| (new - old) / dt)
        .collect();
    let new_state = SystemState {
        t: t_new,
        u_coef,
        v_coef,
        p_coef,
    };

    let dets = problem.monitor_determinants(&new_state);
    let threshold = problem.settings.det_threshold;
    if !(dets.min_det_p >= threshold && dets.min_det_grad_y >= threshold) {
        return Err(Error::DeterminantBreached {
            min_det_p: dets.min_det_p,
            min_det_grad_y: dets.min_det_grad_y,
        });
    }

    let [d_kv, d_m, d_h] = problem.step_dissipation(&new_state, state, dt)?;
    let z_old = problem.pack(&state.u_coef, &state.p_coef);
    let force = problem.external_force(t_new);
    let mut work = 0.0;
    for (k, f) in force.iter().enumerate() {
        work += f * (outcome.z[k] - z_old[k]);
    }
    for dof in problem.constrained_dofs() {
        work += outcome.raw_residual[dof] * (outcome.z[dof] - z_old[dof]);
    }

    let mut account = *account;
    account.dissipated_kv += d_kv;
    account.dissipated_m += d_m;
    account.dissipated_h += d_h;
    account.external_work += work;

    let mut energy = problem.energies(&new_state)?;
    let balance_residual = account.close(&mut energy);
    let report = StepReport {
        t: t_new,
        dt,
        newton_iters: outcome.iterations,
        initial_residual: outcome.initial_residual,
        residual_norm: outcome.residual_norm,
        min_det_p: dets.min_det_p,
        min_det_grad_y: dets.min_det_grad_y,
        energy,
        balance_residual,
    };
    Ok((new_state, account, report))
}

/// Everything needed to continue a run bitwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub state: SystemState,
    pub account: EnergyAccount,
    /// Accepted steps so far.
    pub step: usize,
    /// Nominal step size for the next attempt.
    pub dt: f64,
    /// Consecutive easy steps so far.
    pub easy_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeControl {
    pub t_end: f64,
    pub dt_max: f64,
    /// The run aborts once a halved step falls below this.
    pub dt_min: f64,
}

/// Advances `cp` to `control.t_end`, calling `on_step` after every accepted step.
///
/// Failed steps (Newton divergence, determinant breach) are retried with half
/// the step; five consecutive easy steps double it up to `dt_max`. The last
/// step is shortened to land on `t_end`. On error `cp` holds the last accepted state.
pub fn run_time_loop<const D: usize>(
    problem: &Problem<D>,
    cp: &mut Checkpoint,
    control: &TimeControl,
    mut on_step: impl FnMut(&Checkpoint, &StepReport) -> Result<()>,
) -> Result<()> {
    let t_end = control.t_end;
    while cp.state.t < t_end && (t_end - cp.state.t) > 1e-12 * t_end.max(1.0) {
        let remaining = t_end - cp.state.t;
        // Clip only a genuine overshoot: a step that lands on t_end up to
        // rounding keeps its nominal size, so runs stopped at an intermediate
        // time resume bitwise.
        let dt = if cp.dt > remaining * (1.0 + 1e-9) {
            remaining
        } else {
            cp.dt
        };
        match step_implicit_euler(problem, &cp.state, &cp.account, dt) {
            Ok((state, account, report)) => {
                cp.state = state;
                cp.account = account;
                cp.step += 1;
                if report.newton_iters <= EASY_NEWTON_ITERS {
                    cp.easy_steps += 1;
                } else {
                    cp.easy_steps = 0;
                }
                if cp.easy_steps >= EASY_STEPS_TO_GROW {
                    cp.dt = (2.0 * cp.dt).min(control.dt_max);
                    cp.easy_steps = 0;
                }
                on_step(cp, &report)?;
            }
            Err(e) if e.is_step_failure() => {
                cp.dt = 0.5 * dt;
                cp.easy_steps = 0;
                if cp.dt < control.dt_min {
                    return Err(Error::StepCollapsed {
                        t: cp.state.t,
                        dt: cp.dt,
                    });
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(())
}
