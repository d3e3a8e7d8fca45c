//! Stored-energy densities, the quadratic dissipation potential and the
//! elastic Cauchy–Green kinematics they are built on.
//!
//! The stored energy of a state `(y, Π)` is
//!
//! ```text
//! Φ = ∫ F_E(∇y Π⁻¹) + F_H(Π) + F_G(∇(∇y Π⁻¹)) dx
//! ```
//!
//! and the dissipation potential is
//!
//! ```text
//! R = ∫ ν_m/2 |Π̇|² + ν_h/2 |∇²Π̇|² + ν_kv/2 |Ċ_el|² dx,   C_el = Π⁻ᵀ∇yᵀ∇yΠ⁻¹.
//! ```

use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::{grad_inverse, grad_product, Mat, Ten3, Ten4};

/// Constitutive and viscous coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    /// Mass density.
    pub rho: f64,
    /// Maxwellian creep viscosity (on `Π̇`).
    pub nu_m: f64,
    /// Higher-order creep viscosity (on `∇²Π̇`).
    pub nu_h: f64,
    /// Kelvin–Voigt viscosity (on `Ċ_el`).
    pub nu_kv: f64,
    /// Elastic shear modulus.
    pub mu: f64,
    /// Coefficient of the elastic determinant barrier.
    pub eps_b: f64,
    /// Exponent of the elastic determinant barrier.
    pub r_el: f64,
    /// Softness of the inelastic determinant constraint.
    pub delta: f64,
    /// Exponent of the inelastic determinant barrier (an integer ≥ 3).
    pub s_h: f64,
    /// Coefficient of the elastic-strain-gradient energy.
    pub eps_g: f64,
    /// Exponent of the elastic-strain-gradient energy.
    pub p_g: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            rho: 1.0,
            nu_m: 1.0,
            nu_h: 0.01,
            nu_kv: 1.0,
            mu: 1.0,
            eps_b: 0.1,
            r_el: 7.0,
            delta: 0.01,
            s_h: 4.0,
            eps_g: 0.01,
            p_g: 3.0,
        }
    }
}

/// A violated parameter constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Parameter name as used in configuration files.
    pub key: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

/// Sobolev exponent `2*` used by the exponent constraints.
///
/// For `d = 3` this is `6`. For `d = 2` every finite exponent is admissible;
/// the convention `2* = 2·p_g` is used so that the constraints have a value.
pub fn sobolev_star(d: usize, p_g: f64) -> f64 {
    match d {
        2 => 2.0 * p_g,
        3 => 6.0,
        _ => f64::NAN,
    }
}

/// Checks every parameter constraint and reports all violations.
pub fn validate_params(p: &MaterialParams, d: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut check = |ok: bool, key: &'static str, message: String| {
        if !ok {
            out.push(Violation { key, message });
        }
    };
    let df = d as f64;
    check(
        p.rho >= 0.0,
        "rho",
        format!("rho must be non-negative (got {})", p.rho),
    );
    check(
        p.nu_m > 0.0,
        "nu_m",
        format!("nu_m must be positive (got {})", p.nu_m),
    );
    check(
        p.nu_h > 0.0,
        "nu_h",
        format!("nu_h must be positive (got {})", p.nu_h),
    );
    check(
        p.nu_kv > 0.0,
        "nu_kv",
        format!("nu_kv must be positive (got {})", p.nu_kv),
    );
    check(
        p.mu > 0.0,
        "mu",
        format!("mu must be positive (got {})", p.mu),
    );
    check(
        p.eps_b > 0.0,
        "eps_b",
        format!("eps_b must be positive (got {})", p.eps_b),
    );
    check(
        p.delta > 0.0,
        "delta",
        format!("delta must be positive (got {})", p.delta),
    );
    check(
        p.eps_g > 0.0,
        "eps_g",
        format!("eps_g must be positive (got {})", p.eps_g),
    );

    let star = sobolev_star(d, p.p_g);
    check(
        p.p_g > df,
        "p_g",
        format!("p_g must exceed d (got p_g = {}, d = {d})", p.p_g),
    );
    check(
        p.p_g < star,
        "p_g",
        format!(
            "p_g must be below the Sobolev exponent {star} (got {})",
            p.p_g
        ),
    );
    if p.p_g > df {
        let bound = p.p_g * df / (p.p_g - df);
        check(
            p.r_el > bound,
            "r_el",
            format!(
                "r_el must exceed p_g·d/(p_g − d) = {bound} (got {})",
                p.r_el
            ),
        );
    }
    check(
        p.s_h.fract() == 0.0 && p.s_h >= 3.0,
        "s_h",
        format!("s_h must be an integer ≥ 3 (got {})", p.s_h),
    );
    if star > df {
        let bound = star * df / (star - df);
        check(
            p.s_h > bound,
            "s_h",
            format!("s_h must exceed 2*·d/(2* − d) = {bound} (got {})", p.s_h),
        );
    }
    out
}

/// Pointwise fields at a quadrature point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadState<const D: usize> {
    pub grad_y: Mat<D>,
    /// `(∇∇y)_ijk = ∂_k∂_j y_i`.
    pub grad2_y: Ten3<D>,
    pub p: Mat<D>,
    /// `(∇Π)_ijk = ∂_k Π_ij`.
    pub grad_p: Ten3<D>,
    /// `(∇²Π)_ijkl = ∂_k∂_l Π_ij`.
    pub grad2_p: Ten4<D>,
    pub rate_grad_y: Mat<D>,
    pub rate_p: Mat<D>,
    pub rate_grad2_p: Ten4<D>,
}

impl<const D: usize> QuadState<D> {
    /// Undeformed, relaxed, motionless state: `∇y = Π = I`, all else zero.
    pub fn reference() -> Self {
        QuadState {
            grad_y: Mat::identity(),
            grad2_y: Ten3::zeros(),
            p: Mat::identity(),
            grad_p: Ten3::zeros(),
            grad2_p: Ten4::zeros(),
            rate_grad_y: Mat::zeros(),
            rate_p: Mat::zeros(),
            rate_grad2_p: Ten4::zeros(),
        }
    }
}

/// Stored, dissipated and supplied energies.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    /// `∫ F_E`.
    pub elastic: f64,
    /// `∫ F_H`.
    pub constraint: f64,
    /// `∫ F_G`.
    pub gradient: f64,
    /// Cumulative `∫∫ ν_kv |Ċ_el|²`.
    pub dissipated_kv: f64,
    /// Cumulative `∫∫ ν_m |Π̇|²`.
    pub dissipated_m: f64,
    /// Cumulative `∫∫ ν_h |∇²Π̇|²`.
    pub dissipated_h: f64,
    /// Cumulative work of loads and boundary reactions.
    pub external_work: f64,
}

impl EnergyBreakdown {
    pub fn stored(&self) -> f64 {
        self.elastic + self.constraint + self.gradient
    }

    pub fn total(&self) -> f64 {
        self.kinetic + self.stored()
    }

    pub fn dissipated(&self) -> f64 {
        self.dissipated_kv + self.dissipated_m + self.dissipated_h
    }
}

fn require_positive_det(det: f64) -> Result<()> {
    if det > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveDeterminant { det })
    }
}

/// Elastic energy density: compressible neo-Hookean plus a one-sided barrier,
/// `F_E(F) = μ/2 (|F|² − d − 2 ln J) + ε_b (1/J − 1)₊^r`, `+∞` for `J ≤ 0`.
pub fn fe_eval<const D: usize>(f: &Mat<D>, p: &MaterialParams) -> f64 {
    let j = f.det();
    if j <= 0.0 {
        return f64::INFINITY;
    }
    let barrier = (1.0 / j - 1.0).max(0.0);
    0.5 * p.mu * (f.norm_sq() - D as f64 - 2.0 * j.ln()) + p.eps_b * barrier.powf(p.r_el)
}

pub fn fe_df<const D: usize>(f: &Mat<D>, p: &MaterialParams) -> Result<Mat<D>> {
    let j = f.det();
    require_positive_det(j)?;
    let f_inv_t = f.inverse_transpose()?;
    let barrier = (1.0 / j - 1.0).max(0.0);
    let coeff = if barrier > 0.0 {
        -p.eps_b * p.r_el * barrier.powf(p.r_el - 1.0) / j
    } else {
        0.0
    };
    Ok((*f - f_inv_t) * p.mu + f_inv_t * coeff)
}

/// Inelastic determinant constraint,
/// `F_H(Π) = δ [1 + (1/J − 1)₊^s] + (J − 1)²/(2δ)`, `+∞` for `J ≤ 0`.
pub fn fh_eval<const D: usize>(pm: &Mat<D>, p: &MaterialParams) -> f64 {
    let j = pm.det();
    if j <= 0.0 {
        return f64::INFINITY;
    }
    let barrier = (1.0 / j - 1.0).max(0.0);
    p.delta * (1.0 + barrier.powf(p.s_h)) + (j - 1.0).powi(2) / (2.0 * p.delta)
}

pub fn fh_dp<const D: usize>(pm: &Mat<D>, p: &MaterialParams) -> Result<Mat<D>> {
    let j = pm.det();
    require_positive_det(j)?;
    let barrier = (1.0 / j - 1.0).max(0.0);
    let barrier_term = if barrier > 0.0 {
        -p.delta * p.s_h * barrier.powf(p.s_h - 1.0) / (j * j)
    } else {
        0.0
    };
    Ok(pm.cofactor() * (barrier_term + (j - 1.0) / p.delta))
}

/// Gradient energy density `F_G(G) = ε_g |G|^p`.
pub fn fg_eval<const D: usize>(g: &Ten3<D>, p: &MaterialParams) -> f64 {
    p.eps_g * g.norm().powf(p.p_g)
}

pub fn fg_dg<const D: usize>(g: &Ten3<D>, p: &MaterialParams) -> Ten3<D> {
    let n = g.norm();
    if n == 0.0 || p.eps_g == 0.0 {
        return Ten3::zeros();
    }
    *g * (p.eps_g * p.p_g * n.powf(p.p_g - 2.0))
}

/// Elastic Cauchy–Green tensor `C_el = Π⁻ᵀ∇yᵀ∇yΠ⁻¹`.
pub fn cel<const D: usize>(grad_y: &Mat<D>, pm: &Mat<D>) -> Result<Mat<D>> {
    require_positive_det(pm.det())?;
    let f_el = *grad_y * pm.inverse()?;
    Ok(f_el.transpose() * f_el)
}

/// Rate of the elastic Cauchy–Green tensor,
/// `Ċ_el = Π⁻ᵀ(∇ẏᵀ∇y + ∇yᵀ∇ẏ)Π⁻¹ − 2 sym(C_el Π̇ Π⁻¹)`.
pub fn cel_rate<const D: usize>(q: &QuadState<D>) -> Result<Mat<D>> {
    require_positive_det(q.p.det())?;
    let p_inv = q.p.inverse()?;
    Ok(cel_rate_with(q, &p_inv))
}

fn cel_rate_with<const D: usize>(q: &QuadState<D>, p_inv: &Mat<D>) -> Mat<D> {
    let p_inv_t = p_inv.transpose();
    let m = q.rate_grad_y.transpose() * q.grad_y + q.grad_y.transpose() * q.rate_grad_y;
    let f_el = q.grad_y * *p_inv;
    let c = f_el.transpose() * f_el;
    p_inv_t * m * *p_inv - (c * q.rate_p * *p_inv).sym() * 2.0
}

/// Kelvin–Voigt viscous stress `Σ = ν_kv Ċ_el`.
pub fn sigma_kv<const D: usize>(q: &QuadState<D>, p: &MaterialParams) -> Result<Mat<D>> {
    Ok(cel_rate(q)? * p.nu_kv)
}

/// Pointwise dissipation potential.
pub fn dissipation_density<const D: usize>(q: &QuadState<D>, p: &MaterialParams) -> Result<f64> {
    let c_rate = cel_rate(q)?;
    Ok(0.5 * p.nu_m * q.rate_p.norm_sq()
        + 0.5 * p.nu_h * q.rate_grad2_p.norm_sq()
        + 0.5 * p.nu_kv * c_rate.norm_sq())
}

/// Derived kinematic quantities shared by the energy and the weak forms.
#[derive(Debug, Clone, Copy)]
pub struct Kinematics<const D: usize> {
    pub p_inv: Mat<D>,
    /// `∂_k Π⁻¹`, differentiation index last.
    pub grad_p_inv: Ten3<D>,
    pub f_el: Mat<D>,
    pub grad_f_el: Ten3<D>,
    pub c_el: Mat<D>,
    pub c_el_rate: Mat<D>,
}

impl<const D: usize> Kinematics<D> {
    pub fn new(q: &QuadState<D>) -> Result<Self> {
        require_positive_det(q.p.det())?;
        let p_inv = q.p.inverse()?;
        let grad_p_inv = grad_inverse(&p_inv, &q.grad_p);
        let f_el = q.grad_y * p_inv;
        let grad_f_el = grad_product(&q.grad_y, &q.grad2_y, &p_inv, &grad_p_inv);
        let c_el = f_el.transpose() * f_el;
        let c_el_rate = cel_rate_with(q, &p_inv);
        Ok(Kinematics {
            p_inv,
            grad_p_inv,
            f_el,
            grad_f_el,
            c_el,
            c_el_rate,
        })
    }
}

/// Stored-energy density `F_E(F_el) + F_H(Π) + F_G(∇F_el)`.
pub fn stored_energy_density<const D: usize>(q: &QuadState<D>, p: &MaterialParams) -> f64 {
    match Kinematics::new(q) {
        Ok(k) => fe_eval(&k.f_el, p) + fh_eval(&q.p, p) + fg_eval(&k.grad_f_el, p),
        Err(_) => f64::INFINITY,
    }
}
