//! Damped Newton iteration for one backward-Euler step.

use nalgebra::DVector;

use crate::error::{Error, Result};

use super::assembly::{Problem, StepContext};

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    /// Converged packed unknowns.
    pub z: Vec<f64>,
    /// Number of Newton updates taken.
    pub iterations: usize,
    /// Free-dof residual max-norm at the initial guess.
    pub initial_residual: f64,
    pub residual_norm: f64,
    /// Unconstrained residual at `z`; on prescribed rows these are the reactions.
    pub raw_residual: Vec<f64>,
}

fn free_norms(r: &[f64], free: &[usize]) -> (f64, f64) {
    let mut max = 0.0f64;
    let mut sq = 0.0;
    for &f in free {
        max = max.max(r[f].abs());
        sq += r[f] * r[f];
    }
    (max, sq.sqrt())
}

/// Solves the step system starting from `z` (prescribed values are overwritten).
pub fn solve<const D: usize>(
    problem: &Problem<D>,
    ctx: &StepContext,
    mut z: Vec<f64>,
) -> Result<NewtonOutcome> {
    let settings = problem.settings;
    let free = problem.free_dofs();
    problem.apply_dirichlet(&mut z, ctx.t_new());
    let load_scale = problem
        .external_force(ctx.t_new())
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = settings.tol * (1.0 + load_scale);

    let mut r = problem.raw_residual(&z, ctx)?;
    let (mut norm, mut l2) = free_norms(&r, free);
    if !norm.is_finite() {
        return Err(Error::NewtonDiverged {
            iterations: 0,
            residual: norm,
            last_iterate: z,
        });
    }
    let initial_residual = norm;
    let mut iterations = 0;
    while norm > tol {
        if iterations == settings.max_iters {
            return Err(Error::NewtonDiverged {
                iterations,
                residual: norm,
                last_iterate: z,
            });
        }
        let (_, jac) = problem.residual_and_jacobian(&z, ctx)?;
        let rhs = DVector::from_iterator(free.len(), free.iter().map(|&f| -r[f]));
        let delta = jac
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularMatrix { det: 0.0 })?;

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=settings.max_halvings {
            let mut trial = z.clone();
            for (k, &f) in free.iter().enumerate() {
                trial[f] += alpha * delta[k];
            }
            if let Ok(rt) = problem.raw_residual(&trial, ctx) {
                let (tn, tl2) = free_norms(&rt, free);
                if tn.is_finite() && tl2 < l2 {
                    accepted = Some((trial, rt, tn, tl2));
                    break;
                }
            }
            alpha *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((trial, rt, tn, tl2)) => {
                z = trial;
                r = rt;
                norm = tn;
                l2 = tl2;
            }
            None => {
                return Err(Error::NewtonDiverged {
                    iterations,
                    residual: norm,
                    last_iterate: z,
                })
            }
        }
    }
    Ok(NewtonOutcome {
        z,
        iterations,
        initial_residual,
        residual_norm: norm,
        raw_residual: r,
    })
}
