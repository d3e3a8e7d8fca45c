//! Pointwise integrands of the momentum balance and the creep flow rule.
//!
//! Everything here is instantaneous: fields and rates at a single time.
//! Inertia and external loads are added by the assembler.
//!
//! Two routes to the same numbers are provided. [`momentum_integrand`] and
//! [`flow_integrand`] take explicit test-function derivatives and expand
//! `∇(∇ỹΠ⁻¹)` and `∇(∇y D(Π⁻¹):Π̃)` by the product rule. [`PointKernel`]
//! pre-contracts the same expressions into coefficients that pair directly
//! with basis-function derivatives, which is what assembly uses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constitutive::{
    dissipation_density, fe_df, fe_eval, fg_dg, fg_eval, fh_dp, fh_eval, stored_energy_density,
    Kinematics, MaterialParams, QuadState,
};
use crate::error::Result;
use crate::tensor::{grad_product, Dim, Mat, Ten3, Ten4};

/// Driving forces at a quadrature point, split by origin.
#[derive(Debug, Clone, Copy)]
pub struct DrivingForces<const D: usize> {
    /// `DF_E(F_el) Π⁻ᵀ`, paired with `∇ỹ`.
    pub elastic_stress: Mat<D>,
    /// `2 ∇y Π⁻¹ Σ Π⁻ᵀ`, paired with `∇ỹ`.
    pub kv_stress: Mat<D>,
    /// `DF_G(∇F_el)`, paired with `∇(∇ỹΠ⁻¹)` and with `∇(∇y D(Π⁻¹):Π̃)`.
    pub hyperstress: Ten3<D>,
    /// `−F_elᵀ DF_E(F_el) Π⁻ᵀ`, paired with `Π̃`.
    pub elastic_flow: Mat<D>,
    /// `DF_H(Π)`, paired with `Π̃`.
    pub constraint_flow: Mat<D>,
    /// `−2 C_el Σ Π⁻ᵀ`, paired with `Π̃`.
    pub kv_flow: Mat<D>,
}

impl<const D: usize> DrivingForces<D> {
    pub fn new(q: &QuadState<D>, p: &MaterialParams) -> Result<Self> {
        let k = Kinematics::new(q)?;
        Self::with_kinematics(q, &k, p)
    }

    pub fn with_kinematics(
        q: &QuadState<D>,
        k: &Kinematics<D>,
        p: &MaterialParams,
    ) -> Result<Self> {
        let p_inv_t = k.p_inv.transpose();
        let dfe = fe_df(&k.f_el, p)?;
        let sigma = k.c_el_rate * p.nu_kv;
        Ok(DrivingForces {
            elastic_stress: dfe * p_inv_t,
            kv_stress: k.f_el * sigma * p_inv_t * 2.0,
            hyperstress: fg_dg(&k.grad_f_el, p),
            elastic_flow: -(k.f_el.transpose() * dfe * p_inv_t),
            constraint_flow: fh_dp(&q.p, p)?,
            kv_flow: -(k.c_el * sigma * p_inv_t * 2.0),
        })
    }

    /// First-order stress paired with `∇ỹ`.
    pub fn stress_1(&self) -> Mat<D> {
        self.elastic_stress + self.kv_stress
    }

    /// Zeroth-order inelastic driving force paired with `Π̃` (without `ν_m Π̇`).
    pub fn flow_force(&self) -> Mat<D> {
        self.elastic_flow + self.constraint_flow + self.kv_flow
    }

    /// Hyperstress as it enters the flow rule, paired with `∇(∇y D(Π⁻¹):Π̃)`.
    pub fn flow_hyper(&self) -> Ten3<D> {
        self.hyperstress
    }
}

/// `∇(∇ỹ Π⁻¹)` for a test deformation.
pub fn test_grad_fel<const D: usize>(
    k: &Kinematics<D>,
    test_grad_y: &Mat<D>,
    test_grad2_y: &Ten3<D>,
) -> Ten3<D> {
    grad_product(test_grad_y, test_grad2_y, &k.p_inv, &k.grad_p_inv)
}

/// Momentum integrand for the test field `ỹ`:
/// `DF_E(F_el):(∇ỹΠ⁻¹) + Σ:δ_{∇ẏ}Ċ_el[∇ỹ] + DF_G(∇F_el)⋮∇(∇ỹΠ⁻¹)`.
pub fn momentum_integrand<const D: usize>(
    q: &QuadState<D>,
    test_grad_y: &Mat<D>,
    test_grad2_y: &Ten3<D>,
    p: &MaterialParams,
) -> Result<f64> {
    let k = Kinematics::new(q)?;
    let forces = DrivingForces::with_kinematics(q, &k, p)?;
    let dfe = fe_df(&k.f_el, p)?;
    let elastic = dfe.ddot(&(*test_grad_y * k.p_inv));
    let kv = forces.kv_stress.ddot(test_grad_y);
    let hyper = forces
        .hyperstress
        .tdot(&test_grad_fel(&k, test_grad_y, test_grad2_y));
    Ok(elastic + kv + hyper)
}

/// Flow-rule integrand for the test field `Π̃`:
/// `ν_mΠ̇:Π̃ + ν_h∇²Π̇::∇²Π̃ + [δ_ΠΦ-local + D_{Π̇}Ċ_el:Σ]:Π̃ + DF_G(∇F_el)⋮∇(∇y D(Π⁻¹):Π̃)`.
pub fn flow_integrand<const D: usize>(
    q: &QuadState<D>,
    test_p: &Mat<D>,
    test_grad_p: &Ten3<D>,
    test_grad2_p: &Ten4<D>,
    p: &MaterialParams,
) -> Result<f64> {
    let k = Kinematics::new(q)?;
    let forces = DrivingForces::with_kinematics(q, &k, p)?;
    let viscous = p.nu_m * q.rate_p.ddot(test_p) + p.nu_h * q.rate_grad2_p.qdot(test_grad2_p);

    // W = D(Π⁻¹):Π̃ and its gradient.
    let w = -(k.p_inv * *test_p * k.p_inv);
    let grad_w_slices: [Mat<D>; D] = std::array::from_fn(|c| {
        let d_inv = k.grad_p_inv.slice(c);
        -(d_inv * *test_p * k.p_inv
            + k.p_inv * test_grad_p.slice(c) * k.p_inv
            + k.p_inv * *test_p * d_inv)
    });
    let grad_w = Ten3::from_slices(&grad_w_slices);

    let dfe = fe_df(&k.f_el, p)?;
    let elastic = dfe.ddot(&(q.grad_y * w));
    let constraint = forces.constraint_flow.ddot(test_p);
    let kv = forces.kv_flow.ddot(test_p);
    let hyper = forces
        .hyperstress
        .tdot(&grad_product(&q.grad_y, &q.grad2_y, &w, &grad_w));
    Ok(viscous + elastic + constraint + kv + hyper)
}

/// Integrand coefficients in the form consumed by assembly.
///
/// For test fields the momentum integrand equals
/// `mom_grad:∇ỹ + mom_hess⋮∇∇ỹ` and the flow integrand equals
/// `flow_val:Π̃ + flow_grad⋮∇Π̃ + flow_hess::∇²Π̃`.
#[derive(Debug, Clone, Copy)]
pub struct PointKernel<const D: usize> {
    pub mom_grad: Mat<D>,
    pub mom_hess: Ten3<D>,
    pub flow_val: Mat<D>,
    pub flow_grad: Ten3<D>,
    pub flow_hess: Ten4<D>,
}

impl<const D: usize> PointKernel<D> {
    pub fn new(q: &QuadState<D>, p: &MaterialParams) -> Result<Self> {
        let k = Kinematics::new(q)?;
        let forces = DrivingForces::with_kinematics(q, &k, p)?;
        let h = &forces.hyperstress.0;
        let p_inv = &k.p_inv;
        let p_inv_t = p_inv.transpose();

        let mut mom_grad = forces.stress_1();
        let mut mom_hess = Ten3::zeros();
        let mut flow_val = q.rate_p * p.nu_m + forces.flow_force();
        let mut flow_grad = Ten3::zeros();

        if forces.hyperstress.max_abs() > 0.0 {
            // Momentum: H ⋮ ∇(∇ỹΠ⁻¹) = R:∇ỹ + Q⋮∇∇ỹ.
            for i in 0..D {
                for m in 0..D {
                    let mut r = 0.0;
                    for j in 0..D {
                        for c in 0..D {
                            r += h[i][j][c] * k.grad_p_inv.0[m][j][c];
                        }
                    }
                    mom_grad.0[i][m] += r;
                    for c in 0..D {
                        let mut s = 0.0;
                        for j in 0..D {
                            s += h[i][j][c] * p_inv.0[m][j];
                        }
                        mom_hess.0[i][m][c] = s;
                    }
                }
            }

            // Flow: H ⋮ ∇(∇y W) = A:W + G⋮∇W with W = −Π⁻¹Π̃Π⁻¹.
            let a = Mat::from_fn(|m, j| {
                let mut s = 0.0;
                for i in 0..D {
                    for c in 0..D {
                        s += h[i][j][c] * q.grad2_y.0[i][m][c];
                    }
                }
                s
            });
            let g = q.grad_y.transpose().mul_ten3(&forces.hyperstress);
            let mut z0 = -(p_inv_t * a * p_inv_t);
            for c in 0..D {
                let gc = g.slice(c);
                let dc_t = k.grad_p_inv.slice(c).transpose();
                z0 -= dc_t * gc * p_inv_t + p_inv_t * gc * dc_t;
                let z1 = -(p_inv_t * gc * p_inv_t);
                for i in 0..D {
                    for j in 0..D {
                        flow_grad.0[i][j][c] = z1.0[i][j];
                    }
                }
            }
            flow_val += z0;
        }

        Ok(PointKernel {
            mom_grad,
            mom_hess,
            flow_val,
            flow_grad,
            flow_hess: q.rate_grad2_p * p.nu_h,
        })
    }

    pub fn momentum(&self, test_grad_y: &Mat<D>, test_grad2_y: &Ten3<D>) -> f64 {
        self.mom_grad.ddot(test_grad_y) + self.mom_hess.tdot(test_grad2_y)
    }

    pub fn flow(&self, test_p: &Mat<D>, test_grad_p: &Ten3<D>, test_grad2_p: &Ten4<D>) -> f64 {
        self.flow_val.ddot(test_p)
            + self.flow_grad.tdot(test_grad_p)
            + self.flow_hess.qdot(test_grad2_p)
    }
}

/// Maximum relative finite-difference errors per derivative family.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FdReport {
    pub trials: usize,
    /// `δ_yΦ` (elastic + gradient parts of the momentum integrand).
    pub delta_y_phi: f64,
    /// `δ_ΠΦ` (elastic, constraint and gradient parts of the flow integrand).
    pub delta_p_phi: f64,
    /// Kelvin–Voigt stress pairing `δ_{∇ẏ}R`.
    pub kv_stress: f64,
    /// Flow pairing `δ_{Π̇}R` (Maxwell, higher-order and Kelvin–Voigt parts).
    pub kv_flow: f64,
    /// The `F_G` contribution to `δ_yΦ` on its own.
    pub hyperstress: f64,
}

impl FdReport {
    pub fn max_error(&self) -> f64 {
        self.delta_y_phi
            .max(self.delta_p_phi)
            .max(self.kv_stress)
            .max(self.kv_flow)
            .max(self.hyperstress)
    }

    /// `(name, max relative error)` for each family, in report order.
    pub fn families(&self) -> [(&'static str, f64); 5] {
        [
            ("delta_y_phi", self.delta_y_phi),
            ("delta_p_phi", self.delta_p_phi),
            ("kv_stress", self.kv_stress),
            ("kv_flow", self.kv_flow),
            ("hyperstress", self.hyperstress),
        ]
    }
}

/// Relative error with a floor, so that two vanishing numbers compare as equal.
pub fn rel_error(analytic: f64, reference: f64) -> f64 {
    let diff = (analytic - reference).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(reference.abs()).max(1e-8)
}

/// Central difference of `f` at `0` with step `h`.
pub fn central_difference(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (f(h) - f(-h)) / (2.0 * h)
}

/// Step used by every finite-difference check, `h = 1e-6·(1 + |state|)`.
pub fn fd_step(state_norm: f64) -> f64 {
    1e-6 * (1.0 + state_norm)
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-1.0..1.0)
}

fn random_mat<const D: usize>(rng: &mut ChaCha8Rng, scale: f64) -> Mat<D> {
    let mut m = Mat::zeros();
    for i in 0..D {
        for j in 0..D {
            m.0[i][j] = scale * uniform(rng);
        }
    }
    m
}

fn random_ten3<const D: usize>(rng: &mut ChaCha8Rng, scale: f64, sym_last: bool) -> Ten3<D> {
    let mut t = Ten3::zeros();
    for i in 0..D {
        for j in 0..D {
            for k in 0..D {
                if sym_last && k < j {
                    t.0[i][j][k] = t.0[i][k][j];
                } else {
                    t.0[i][j][k] = scale * uniform(rng);
                }
            }
        }
    }
    t
}

fn random_ten4<const D: usize>(rng: &mut ChaCha8Rng, scale: f64) -> Ten4<D> {
    let mut t = Ten4::zeros();
    for i in 0..D {
        for j in 0..D {
            for k in 0..D {
                for l in 0..D {
                    t.0[i][j][k][l] = if l < k {
                        t.0[i][j][l][k]
                    } else {
                        scale * uniform(rng)
                    };
                }
            }
        }
    }
    t
}

/// Random invertible matrix near the identity with `det ≥ min_det`.
fn random_near_identity<const D: usize>(rng: &mut ChaCha8Rng, scale: f64, min_det: f64) -> Mat<D> {
    loop {
        let m = Mat::identity() + random_mat(rng, scale);
        if m.det() >= min_det {
            return m;
        }
    }
}

/// Random admissible quadrature state: `det ∇y, det Π ≥ 0.3`, rates of order one.
pub fn random_state<const D: usize>(rng: &mut ChaCha8Rng) -> QuadState<D> {
    QuadState {
        grad_y: random_near_identity(rng, 0.3, 0.3),
        grad2_y: random_ten3(rng, 0.4, true),
        p: random_near_identity(rng, 0.3, 0.3),
        grad_p: random_ten3(rng, 0.4, false),
        grad2_p: random_ten4(rng, 0.4),
        rate_grad_y: random_mat(rng, 0.5),
        rate_p: random_mat(rng, 0.5),
        rate_grad2_p: random_ten4(rng, 0.5),
    }
}

/// Random test direction `(∇ỹ, ∇∇ỹ, Π̃, ∇Π̃, ∇²Π̃)`.
pub struct TestDirection<const D: usize> {
    pub grad_y: Mat<D>,
    pub grad2_y: Ten3<D>,
    pub p: Mat<D>,
    pub grad_p: Ten3<D>,
    pub grad2_p: Ten4<D>,
}

pub fn random_direction<const D: usize>(rng: &mut ChaCha8Rng) -> TestDirection<D> {
    TestDirection {
        grad_y: random_mat(rng, 1.0),
        grad2_y: random_ten3(rng, 1.0, true),
        p: random_mat(rng, 1.0),
        grad_p: random_ten3(rng, 1.0, false),
        grad2_p: random_ten4(rng, 1.0),
    }
}

/// Checks every variational derivative against central differences of the
/// energy and dissipation densities at random admissible states.
pub fn fd_check<const D: usize>(seed: u64, trials: usize, p: &MaterialParams) -> Result<FdReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FdReport {
        trials,
        ..FdReport::default()
    };
    let energetic = MaterialParams {
        nu_kv: 0.0,
        nu_m: 0.0,
        nu_h: 0.0,
        ..*p
    };
    let gradient_only = MaterialParams {
        mu: 0.0,
        eps_b: 0.0,
        ..energetic
    };
    for _ in 0..trials {
        let q: QuadState<D> = random_state(&mut rng);
        let dir: TestDirection<D> = random_direction(&mut rng);

        // δ_yΦ
        let y_norm = (q.grad_y.norm_sq() + q.grad2_y.norm_sq()).sqrt();
        let along_y = |tau: f64| {
            let mut s = q;
            s.grad_y += dir.grad_y * tau;
            s.grad2_y += dir.grad2_y * tau;
            s
        };
        let fd = central_difference(|t| stored_energy_density(&along_y(t), p), fd_step(y_norm));
        let an = momentum_integrand(&q, &dir.grad_y, &dir.grad2_y, &energetic)?;
        report.delta_y_phi = report.delta_y_phi.max(rel_error(an, fd));

        let fd = central_difference(
            |t| {
                Kinematics::new(&along_y(t))
                    .map(|k| fg_eval(&k.grad_f_el, p))
                    .unwrap_or(f64::INFINITY)
            },
            fd_step(y_norm),
        );
        let an = momentum_integrand(&q, &dir.grad_y, &dir.grad2_y, &gradient_only)?;
        report.hyperstress = report.hyperstress.max(rel_error(an, fd));

        // δ_ΠΦ
        let p_norm = (q.p.norm_sq() + q.grad_p.norm_sq()).sqrt();
        let fd = central_difference(
            |t| {
                let mut s = q;
                s.p += dir.p * t;
                s.grad_p += dir.grad_p * t;
                stored_energy_density(&s, p)
            },
            fd_step(p_norm),
        );
        let an = flow_integrand(&q, &dir.p, &dir.grad_p, &dir.grad2_p, &energetic)?;
        report.delta_p_phi = report.delta_p_phi.max(rel_error(an, fd));

        // δ_{∇ẏ}R
        let fd = central_difference(
            |t| {
                let mut s = q;
                s.rate_grad_y += dir.grad_y * t;
                dissipation_density(&s, p).unwrap_or(f64::NAN)
            },
            fd_step(q.rate_grad_y.norm()),
        );
        let an = DrivingForces::new(&q, p)?.kv_stress.ddot(&dir.grad_y);
        report.kv_stress = report.kv_stress.max(rel_error(an, fd));

        // δ_{Π̇}R
        let rate_norm = (q.rate_p.norm_sq() + q.rate_grad2_p.norm_sq()).sqrt();
        let fd = central_difference(
            |t| {
                let mut s = q;
                s.rate_p += dir.p * t;
                s.rate_grad2_p += dir.grad2_p * t;
                dissipation_density(&s, p).unwrap_or(f64::NAN)
            },
            fd_step(rate_norm),
        );
        let forces = DrivingForces::new(&q, p)?;
        let an = p.nu_m * q.rate_p.ddot(&dir.p)
            + p.nu_h * q.rate_grad2_p.qdot(&dir.grad2_p)
            + forces.kv_flow.ddot(&dir.p);
        report.kv_flow = report.kv_flow.max(rel_error(an, fd));
    }
    Ok(report)
}

/// [`fd_check`] with the default parameters and a runtime dimension.
pub fn fd_check_all(seed: u64, trials: usize, d: Dim) -> Result<FdReport> {
    fd_check_all_with(seed, trials, d, &MaterialParams::default())
}

pub fn fd_check_all_with(seed: u64, trials: usize, d: Dim, p: &MaterialParams) -> Result<FdReport> {
    match d {
        Dim::Two => fd_check::<2>(seed, trials, p),
        Dim::Three => fd_check::<3>(seed, trials, p),
    }
}

/// Elastic and constraint energy only (no gradient term), for callers that
/// have no second gradients at hand.
pub fn local_energy_density<const D: usize>(f_el: &Mat<D>, pm: &Mat<D>, p: &MaterialParams) -> f64 {
    fe_eval(f_el, p) + fh_eval(pm, p)
}
