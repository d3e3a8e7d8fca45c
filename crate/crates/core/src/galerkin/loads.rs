//! Time-dependent loads and boundary data.

use super::space::Side;

/// Scalar amplitude in time.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeFunction {
    Constant(f64),
    /// Breakpoints `(t, a)` with increasing `t`; linear in between and
    /// constant beyond the first and last breakpoint.
    PiecewiseLinear(Vec<(f64, f64)>),
}

impl TimeFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFunction::Constant(a) => *a,
            TimeFunction::PiecewiseLinear(pts) => {
                let (first, last) = match (pts.first(), pts.last()) {
                    (Some(f), Some(l)) => (f, l),
                    _ => return 0.0,
                };
                if t <= first.0 {
                    return first.1;
                }
                if t >= last.0 {
                    return last.1;
                }
                let k = pts.partition_point(|p| p.0 <= t);
                let (t0, a0) = pts[k - 1];
                let (t1, a1) = pts[k];
                a0 + (a1 - a0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// True if breakpoints are strictly increasing in time.
    pub fn is_well_formed(&self) -> bool {
        match self {
            TimeFunction::Constant(a) => a.is_finite(),
            TimeFunction::PiecewiseLinear(pts) => {
                !pts.is_empty()
                    && pts.iter().all(|p| p.0.is_finite() && p.1.is_finite())
                    && pts.windows(2).all(|w| w[0].0 < w[1].0)
            }
        }
    }
}

/// A constant vector scaled by a time amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorLoad {
    pub vector: Vec<f64>,
    pub amplitude: TimeFunction,
}

impl VectorLoad {
    pub fn at(&self, t: f64) -> Vec<f64> {
        let a = self.amplitude.eval(t);
        self.vector.iter().map(|v| v * a).collect()
    }
}

/// Body force, tractions and prescribed displacements.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Loads {
    pub body_force: Option<VectorLoad>,
    pub traction: Vec<(Side, VectorLoad)>,
    /// Prescribed displacement `y − x` on a face.
    pub dirichlet: Vec<(Side, VectorLoad)>,
}
