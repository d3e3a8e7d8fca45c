//! Energy-balance bookkeeping along a trajectory.

use crate::constitutive::EnergyBreakdown;

use super::state::StepReport;

/// One line of an energy series.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRow {
    pub t: f64,
    pub energy: EnergyBreakdown,
    pub balance_residual: f64,
    pub min_det_p: f64,
    pub min_det_grad_y: f64,
    pub newton_iters: usize,
}

impl From<&StepReport> for EnergyRow {
    fn from(r: &StepReport) -> Self {
        EnergyRow {
            t: r.t,
            energy: r.energy,
            balance_residual: r.balance_residual,
            min_det_p: r.min_det_p,
            min_det_grad_y: r.min_det_grad_y,
            newton_iters: r.newton_iters,
        }
    }
}

/// Balance check recomputed from an energy series.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    /// `(t, |E(t) + D(0,t) − E(0) − W(0,t)|)` per row.
    pub residuals: Vec<(f64, f64)>,
    pub max_residual: f64,
    /// Final residual divided by the elapsed time.
    pub residual_per_unit_time: f64,
    /// Largest increase of the stored energy over its initial value.
    pub peak_stored_increase: f64,
    pub min_det_p: f64,
    pub min_det_grad_y: f64,
}

/// Recomputes the balance residual of every row from its breakdown.
pub fn energy_report(rows: &[EnergyRow]) -> EnergyReport {
    let Some(first) = rows.first() else {
        return EnergyReport {
            residuals: Vec::new(),
            max_residual: 0.0,
            residual_per_unit_time: 0.0,
            peak_stored_increase: 0.0,
            min_det_p: f64::INFINITY,
            min_det_grad_y: f64::INFINITY,
        };
    };
    let e0 = first.energy.total() + first.energy.dissipated() - first.energy.external_work;
    let s0 = first.energy.stored();
    let residuals: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| {
            let e = &r.energy;
            (
                r.t,
                (e.total() + e.dissipated() - e.external_work - e0).abs(),
            )
        })
        .collect();
    let last = rows.last().expect("non-empty");
    let elapsed = last.t - first.t;
    let final_residual = residuals.last().map_or(0.0, |r| r.1);
    EnergyReport {
        max_residual: residuals.iter().fold(0.0, |m, r| m.max(r.1)),
        residual_per_unit_time: if elapsed > 0.0 {
            final_residual / elapsed
        } else {
            0.0
        },
        peak_stored_increase: rows.iter().fold(0.0, |m, r| m.max(r.energy.stored() - s0)),
        min_det_p: rows.iter().fold(f64::INFINITY, |m, r| m.min(r.min_det_p)),
        min_det_grad_y: rows
            .iter()
            .fold(f64::INFINITY, |m, r| m.min(r.min_det_grad_y)),
        residuals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, elastic: f64, diss: f64, work: f64) -> EnergyRow {
        EnergyRow {
            t,
            energy: EnergyBreakdown {
                elastic,
                dissipated_m: diss,
                external_work: work,
                ..Default::default()
            },
            balance_residual: 0.0,
            min_det_p: 1.0,
            min_det_grad_y: 1.0,
            newton_iters: 0,
        }
    }

    #[test]
    fn static_trajectory_balances() {
        let rows = vec![row(0.0, 0.0, 0.0, 0.0), row(1.0, 0.0, 0.0, 0.0)];
        let rep = energy_report(&rows);
        assert_eq!(rep.max_residual, 0.0);
    }

    #[test]
    fn detects_imbalance() {
        let rows = vec![row(0.0, 0.0, 0.0, 0.0), row(2.0, 1.0, 0.5, 1.0)];
        let rep = energy_report(&rows);
        assert!((rep.max_residual - 0.5).abs() < 1e-15);
        assert!((rep.residual_per_unit_time - 0.25).abs() < 1e-15);
        assert_eq!(rep.peak_stored_increase, 1.0);
    }
}
