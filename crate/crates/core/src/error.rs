use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is singular (det = {det:e})")]
    SingularMatrix { det: f64 },

    #[error("non-positive determinant {det:e}")]
    NonPositiveDeterminant { det: f64 },

    #[error(
        "non-positive determinant {det:e} of {field} in cell {cell}, quadrature point {point}"
    )]
    NonPositiveDeterminantAt {
        field: &'static str,
        det: f64,
        cell: usize,
        point: usize,
    },

    #[error("Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged {
        iterations: usize,
        residual: f64,
        /// Last Newton iterate (packed unknowns).
        last_iterate: Vec<f64>,
    },

    #[error(
        "determinant monitor breached: min det Π = {min_det_p:e}, min det ∇y = {min_det_grad_y:e}"
    )]
    DeterminantBreached { min_det_p: f64, min_det_grad_y: f64 },

    #[error("projected initial state violates the determinant bound: min det Π = {min_det_p:e}, min det ∇y = {min_det_grad_y:e}")]
    ProjectionViolatesDeterminant { min_det_p: f64, min_det_grad_y: f64 },

    #[error("time step collapsed to {dt:e} at t = {t}")]
    StepCollapsed { t: f64, dt: f64 },

    #[error("{0}")]
    Config(#[from] crate::config::ConfigError),

    #[error("malformed dump {path}: {message}")]
    Dump { path: PathBuf, message: String },

    #[error("invalid setup: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures the time stepper recovers from by halving the step.
    pub fn is_step_failure(&self) -> bool {
        matches!(
            self,
            Error::NewtonDiverged { .. }
                | Error::DeterminantBreached { .. }
                | Error::NonPositiveDeterminant { .. }
                | Error::NonPositiveDeterminantAt { .. }
                | Error::SingularMatrix { .. }
        )
    }
}
