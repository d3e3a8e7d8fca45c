//! Spline Galerkin discretization, backward-Euler time stepping and energy audit.

pub mod assembly;
pub mod energy;
pub mod loads;
pub mod newton;
pub mod project;
pub mod simulate;
pub mod space;
pub mod spline;
pub mod state;
pub mod stepper;

pub use assembly::{monitor_determinants, Mode, Problem, SolverSettings, StepContext};
pub use energy::{energy_report, EnergyReport, EnergyRow};
pub use loads::{Loads, TimeFunction, VectorLoad};
pub use project::project_initial;
pub use simulate::{simulate, RunOutcome};
pub use space::{Grid, Side, SplineSpace};
pub use state::{Determinants, EnergyAccount, StepReport, SystemState};
pub use stepper::{run_time_loop, step_implicit_euler, Checkpoint, TimeControl};
