//! Horizontal shearing of the stripe `ℝ × [−ℓ, ℓ]` with a rigid elastic response.
//!
//! The deformation is `y = (x1 + f(t, x2), x2)` with `f(t, ±ℓ) = ±t`, and the
//! elastic strain is the identity, so the creep strain equals the deformation
//! gradient, `Π = [[1, ∂₂f], [0, 1]]`. Candidate gradient regularizers are
//! evaluated on this family: those built on `∇Π` grow without bound as the
//! slip accumulates, while `∇F_el` and the curl-based densities vanish and the
//! rate gradient `∇Π̇` stays constant.

use std::fmt;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::tensor::{grad_inverse, grad_product, Mat, Ten3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// `g(x2) = x2 / ℓ`.
    Linear,
    /// `g(x2) = tanh(x2 / w) / tanh(ℓ / w)`: a slip band of width `w`.
    Tanh,
}

/// Separable slip `f(t, x2) = t·g(x2)` with `g(±ℓ) = ±1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipProfile {
    pub kind: ProfileKind,
    pub ell: f64,
    pub width: f64,
}

impl SlipProfile {
    pub fn linear(ell: f64) -> Self {
        SlipProfile {
            kind: ProfileKind::Linear,
            ell,
            width: f64::NAN,
        }
    }

    pub fn tanh(ell: f64, width: f64) -> Self {
        SlipProfile {
            kind: ProfileKind::Tanh,
            ell,
            width,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ProfileKind::Linear => "linear",
            ProfileKind::Tanh => "tanh",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ell > 0.0 && self.ell.is_finite()) {
            return Err(Error::Invalid(format!(
                "ell must be positive, got {}",
                self.ell
            )));
        }
        if self.kind == ProfileKind::Tanh && !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::Invalid(format!(
                "width must be positive, got {}",
                self.width
            )));
        }
        Ok(())
    }

    /// `[g, g', g'']` at `x2`.
    pub fn shape(&self, x2: f64) -> [f64; 3] {
        match self.kind {
            ProfileKind::Linear => [x2 / self.ell, 1.0 / self.ell, 0.0],
            ProfileKind::Tanh => {
                let w = self.width;
                let norm = (self.ell / w).tanh();
                let th = (x2 / w).tanh();
                let sech2 = 1.0 - th * th;
                [
                    th / norm,
                    sech2 / (w * norm),
                    -2.0 * th * sech2 / (w * w * norm),
                ]
            }
        }
    }

    /// `f(t, x2)`.
    pub fn slip(&self, t: f64, x2: f64) -> f64 {
        t * self.shape(x2)[0]
    }
}

/// Π = ∇y at `(t, x2)`; unit upper triangular, so `det Π = 1` exactly.
pub fn plastic_strain_stripe(profile: &SlipProfile, t: f64, x2: f64) -> Mat<2> {
    let g1 = profile.shape(x2)[1];
    Mat([[1.0, t * g1], [0.0, 1.0]])
}

/// `∇Π`, whose only entry is `∂₂Π₁₂ = t·g''`.
pub fn grad_plastic_strain(profile: &SlipProfile, t: f64, x2: f64) -> Ten3<2> {
    let mut g = Ten3::zeros();
    g.0[0][1][1] = t * profile.shape(x2)[2];
    g
}

/// `∇Π̇` for the separable profile: `∂₂Π̇₁₂ = g''`, independent of `t`.
pub fn grad_plastic_rate(profile: &SlipProfile, x2: f64) -> Ten3<2> {
    grad_plastic_strain(profile, 1.0, x2)
}

/// Candidate gradient regularizers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegularizerKind {
    /// `κ/2 |∇Π|²`.
    StandardGradP,
    /// `κ/2 |F⁻ᵀ∇Π|²`.
    PushForward,
    /// `κ/2 |∇(ΠᵀΠ)|²`.
    MetricTensor,
    /// `κ/2 |curl Π|²`.
    CurlP,
    /// `κ/2 |Π⁻ᵀ curl Π|²`.
    PCurlP,
    /// `κ/2 |∇F_el|²`.
    GradFel,
    /// `κ/2 |∇Π̇|²`.
    GradPdot,
}

impl RegularizerKind {
    pub const ALL: [RegularizerKind; 7] = [
        RegularizerKind::StandardGradP,
        RegularizerKind::PushForward,
        RegularizerKind::MetricTensor,
        RegularizerKind::CurlP,
        RegularizerKind::PCurlP,
        RegularizerKind::GradFel,
        RegularizerKind::GradPdot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RegularizerKind::StandardGradP => "standard_grad_p",
            RegularizerKind::PushForward => "push_forward",
            RegularizerKind::MetricTensor => "metric_tensor",
            RegularizerKind::CurlP => "curl_p",
            RegularizerKind::PCurlP => "p_curl_p",
            RegularizerKind::GradFel => "grad_fel",
            RegularizerKind::GradPdot => "grad_pdot",
        }
    }
}

/// Squared norm of the regularizer argument at `(t, x2)`.
///
/// Every argument is assembled from `Π` and `∇Π` with the generic tensor
/// operations (product rule, inverse gradient, curl), not from hand-expanded
/// components.
pub fn regularizer_argument_sq(
    kind: RegularizerKind,
    profile: &SlipProfile,
    t: f64,
    x2: f64,
) -> f64 {
    let p = plastic_strain_stripe(profile, t, x2);
    let grad_p = grad_plastic_strain(profile, t, x2);
    // Unit upper triangular, never singular.
    let p_inv = p.inverse().expect("det Π = 1");
    let p_inv_t = p_inv.transpose();
    match kind {
        RegularizerKind::StandardGradP => grad_p.norm_sq(),
        RegularizerKind::PushForward => {
            // Rigid elastic response: F = ∇y = Π.
            p_inv_t.mul_ten3(&grad_p).norm_sq()
        }
        RegularizerKind::MetricTensor => {
            let grad_pt = Ten3::from_fn(|i, j, k| grad_p.0[j][i][k]);
            grad_product(&p.transpose(), &grad_pt, &p, &grad_p).norm_sq()
        }
        RegularizerKind::CurlP => {
            let c = grad_p.curl_2d();
            c[0] * c[0] + c[1] * c[1]
        }
        RegularizerKind::PCurlP => {
            let c = p_inv_t.mul_vec(&grad_p.curl_2d());
            c[0] * c[0] + c[1] * c[1]
        }
        RegularizerKind::GradFel => {
            // F_el = ∇y Π⁻¹ with ∇y = Π and ∇∇y = ∇Π.
            let grad_p_inv = grad_inverse(&p_inv, &grad_p);
            grad_product(&p, &grad_p, &p_inv, &grad_p_inv).norm_sq()
        }
        RegularizerKind::GradPdot => grad_plastic_rate(profile, x2).norm_sq(),
    }
}

/// `κ/2 |argument|²`.
pub fn regularizer_density(
    kind: RegularizerKind,
    profile: &SlipProfile,
    t: f64,
    x2: f64,
    kappa: f64,
) -> f64 {
    0.5 * kappa * regularizer_argument_sq(kind, profile, t, x2)
}

/// Composite Gauss–Legendre panels across the stripe: one for the linear
/// profile, about two per band width for the tanh profile.
fn panels(profile: &SlipProfile) -> usize {
    match profile.kind {
        ProfileKind::Linear => 1,
        ProfileKind::Tanh => ((2.0 * profile.ell / profile.width).ceil() as usize * 2).max(2),
    }
}

/// `∫_{−ℓ}^{ℓ}` of the density, with `quad_points` (≥ 16) Gauss points per panel.
pub fn stripe_energy(
    kind: RegularizerKind,
    profile: &SlipProfile,
    t: f64,
    kappa: f64,
    quad_points: usize,
) -> f64 {
    let rule = GaussLegendre::new(quad_points.max(16));
    rule.integrate(
        |x2| regularizer_density(kind, profile, t, x2, kappa),
        -profile.ell,
        profile.ell,
        panels(profile),
    )
}

/// `(1/2ℓ)∫ Π̇ dx2`, from the boundary values of `ḟ = g`.
pub fn mean_rate_gradient(profile: &SlipProfile, _t: f64) -> Mat<2> {
    let upper = profile.shape(profile.ell)[0];
    let lower = profile.shape(-profile.ell)[0];
    Mat([[0.0, (upper - lower) / (2.0 * profile.ell)], [0.0, 0.0]])
}

/// `(1/2ℓ)∫ ∂₂f dx2 = (f(t, ℓ) − f(t, −ℓ)) / 2ℓ`.
pub fn mean_slip_gradient(profile: &SlipProfile, t: f64) -> f64 {
    (profile.slip(t, profile.ell) - profile.slip(t, -profile.ell)) / (2.0 * profile.ell)
}

/// Long-time behavior of a regularizer energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Classification {
    Vanishes,
    Bounded,
    Grows(f64),
}

impl Classification {
    pub fn label(&self) -> &'static str {
        match self {
            Classification::Vanishes => "vanishes",
            Classification::Bounded => "bounded",
            Classification::Grows(_) => "grows",
        }
    }

    /// Same label; growth exponents may differ.
    pub fn same_kind(&self, other: &Classification) -> bool {
        self.label() == other.label()
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Grows(e) => write!(f, "grows({e:.4})"),
            other => f.write_str(other.label()),
        }
    }
}

/// Energies with `max ≤` this are classified as vanishing.
pub const VANISH_TOL: f64 = 1e-12;
/// Trailing-decade relative drift below this counts as bounded.
pub const BOUNDED_DRIFT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesReport {
    pub profile: SlipProfile,
    pub kind: RegularizerKind,
    pub energies: Vec<f64>,
    /// Log–log least-squares slope over the trailing decade.
    pub exponent: f64,
    /// `(max − min) / max` over the trailing decade.
    pub trailing_drift: f64,
    pub classification: Classification,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub kappa: f64,
    pub times: Vec<f64>,
    pub series: Vec<SeriesReport>,
}

impl AuditReport {
    pub fn find(&self, profile: ProfileKind, kind: RegularizerKind) -> Option<&SeriesReport> {
        self.series
            .iter()
            .find(|s| s.profile.kind == profile && s.kind == kind)
    }
}

/// `n` logarithmically spaced times from `t_min` to `t_max`.
pub fn log_time_grid(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
    let (a, b) = (t_min.ln(), t_max.ln());
    (0..n)
        .map(|k| {
            if k + 1 == n {
                t_max
            } else if k == 0 {
                t_min
            } else {
                (a + (b - a) * k as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Slope of the least-squares line through `(ln t, ln E)` over points with `E > 0`.
pub fn fit_exponent(times: &[f64], energies: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(energies)
        .filter(|(_, e)| **e > 0.0)
        .map(|(t, e)| (t.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

pub fn classify(times: &[f64], energies: &[f64]) -> (Classification, f64, f64) {
    let t_max = times.last().copied().unwrap_or(0.0);
    let (tt, te): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(energies)
        .filter(|(t, _)| **t >= t_max / 10.0 * (1.0 - 1e-12))
        .map(|(t, e)| (*t, *e))
        .unzip();
    let max_all = energies.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let exponent = fit_exponent(&tt, &te);
    let hi = te.iter().fold(f64::NEG_INFINITY, |m, e| m.max(*e));
    let lo = te.iter().fold(f64::INFINITY, |m, e| m.min(*e));
    let drift = if hi > 0.0 { (hi - lo) / hi } else { 0.0 };
    let class = if max_all <= VANISH_TOL {
        Classification::Vanishes
    } else if drift <= BOUNDED_DRIFT {
        Classification::Bounded
    } else {
        Classification::Grows(exponent)
    };
    (class, exponent, drift)
}

/// Energies of every (profile, kind) pair on `times`, with fitted exponents and classifications.
pub fn audit(
    profiles: &[SlipProfile],
    kinds: &[RegularizerKind],
    times: &[f64],
    kappa: f64,
    quad_points: usize,
) -> Result<AuditReport> {
    if times.len() < 2 || times.windows(2).any(|w| !(w[0] < w[1])) || times[0] <= 0.0 {
        return Err(Error::Invalid(
            "times must be positive and strictly increasing".into(),
        ));
    }
    if times[times.len() - 1] / times[0] < 100.0 * (1.0 - 1e-12) {
        return Err(Error::Invalid(
            "times must span at least two decades".into(),
        ));
    }
    if quad_points < 16 {
        return Err(Error::Invalid(
            "at least 16 quadrature points are required".into(),
        ));
    }
    let mut series = Vec::new();
    for profile in profiles {
        profile.validate()?;
        for &kind in kinds {
            let energies: Vec<f64> = times
                .iter()
                .map(|&t| stripe_energy(kind, profile, t, kappa, quad_points))
                .collect();
            let (classification, exponent, trailing_drift) = classify(times, &energies);
            series.push(SeriesReport {
                profile: *profile,
                kind,
                energies,
                exponent,
                trailing_drift,
                classification,
            });
        }
    }
    Ok(AuditReport {
        kappa,
        times: times.to_vec(),
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strain_at_time_zero_is_identity() {
        let p = SlipProfile::tanh(1.0, 0.2);
        assert_eq!(plastic_strain_stripe(&p, 0.0, 0.3), Mat::identity());
    }

    #[test]
    fn linear_profile_has_constant_shear() {
        let p = SlipProfile::linear(2.0);
        for x2 in [-2.0, -0.5, 0.0, 1.7] {
            assert_eq!(plastic_strain_stripe(&p, 3.0, x2).0[0][1], 1.5);
        }
    }

    #[test]
    fn vanishing_regularizers_are_exactly_zero() {
        let p = SlipProfile::tanh(1.0, 0.2);
        for kind in [
            RegularizerKind::GradFel,
            RegularizerKind::CurlP,
            RegularizerKind::PCurlP,
        ] {
            for t in [0.5, 3.0, 100.0] {
                for x2 in [-0.9, -0.1, 0.0, 0.05, 0.7] {
                    assert_eq!(regularizer_density(kind, &p, t, x2, 1.0), 0.0, "{kind:?}");
                }
            }
        }
    }

    #[test]
    fn mean_gradients() {
        let p = SlipProfile::tanh(1.0, 0.2);
        assert_eq!(mean_rate_gradient(&p, 5.0), Mat([[0.0, 1.0], [0.0, 0.0]]));
        assert_eq!(
            mean_rate_gradient(&SlipProfile::linear(2.0), 0.1).0[0][1],
            0.5
        );
        assert_eq!(mean_slip_gradient(&p, 3.0), 3.0);
        assert_eq!(mean_slip_gradient(&p, 0.0), 0.0);
    }

    #[test]
    fn exponent_of_a_power_law() {
        let t = log_time_grid(1.0, 100.0, 21);
        let e: Vec<f64> = t.iter().map(|t| 3.0 * t.powf(2.5)).collect();
        assert!((fit_exponent(&t, &e) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn audit_rejects_short_time_grids() {
        let p = [SlipProfile::linear(1.0)];
        let kinds = [RegularizerKind::GradFel];
        assert!(audit(&p, &kinds, &log_time_grid(1.0, 50.0, 10), 1.0, 32).is_err());
        assert!(audit(&p, &kinds, &[1.0, 0.5, 200.0], 1.0, 32).is_err());
    }
}
