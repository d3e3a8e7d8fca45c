use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rheo_core::constitutive::{cel_rate, MaterialParams, QuadState};
use rheo_core::tensor::{Dim, Mat, Ten3, Ten4};
use rheo_core::weakform::{
    fd_check, fd_check_all, flow_integrand, momentum_integrand, random_direction, random_state,
    DrivingForces, PointKernel,
};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

fn params() -> MaterialParams {
    MaterialParams {
        p_g: 4.0,
        ..MaterialParams::default()
    }
}

fn kernel_matches_direct_route<const D: usize>(seed: u64) -> Result<(), TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = params();
    let q: QuadState<D> = random_state(&mut rng);
    let dir = random_direction::<D>(&mut rng);
    let kernel = PointKernel::new(&q, &p).unwrap();
    let direct = momentum_integrand(&q, &dir.grad_y, &dir.grad2_y, &p).unwrap();
    let reduced = kernel.momentum(&dir.grad_y, &dir.grad2_y);
    prop_assert!(
        rel(direct, reduced) < 1e-12,
        "momentum {} vs {}",
        direct,
        reduced
    );
    let direct = flow_integrand(&q, &dir.p, &dir.grad_p, &dir.grad2_p, &p).unwrap();
    let reduced = kernel.flow(&dir.p, &dir.grad_p, &dir.grad2_p);
    prop_assert!(
        rel(direct, reduced) < 1e-12,
        "flow {} vs {}",
        direct,
        reduced
    );
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn assembly_kernel_equals_product_rule_route_2d(seed in any::<u64>()) {
        kernel_matches_direct_route::<2>(seed)?;
    }

    #[test]
    fn assembly_kernel_equals_product_rule_route_3d(seed in any::<u64>()) {
        kernel_matches_direct_route::<3>(seed)?;
    }

    #[test]
    fn viscous_pairings_reproduce_the_dissipation_rate(seed in any::<u64>()) {
        // Testing the Kelvin–Voigt forces with the actual rates gives Σ:Ċ_el = ν_kv|Ċ_el|².
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = params();
        let q: QuadState<3> = random_state(&mut rng);
        let f = DrivingForces::new(&q, &p).unwrap();
        let lhs = f.kv_stress.ddot(&q.rate_grad_y) + f.kv_flow.ddot(&q.rate_p);
        let rhs = p.nu_kv * cel_rate(&q).unwrap().norm_sq();
        prop_assert!(rel(lhs, rhs) < 1e-12, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn integrands_are_linear_in_the_test_fields(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = params();
        let q: QuadState<2> = random_state(&mut rng);
        let u = random_direction::<2>(&mut rng);
        let w = random_direction::<2>(&mut rng);
        let m = |gy: &Mat<2>, g2: &Ten3<2>| momentum_integrand(&q, gy, g2, &p).unwrap();
        let lhs = m(&(u.grad_y * a + w.grad_y * b), &(u.grad2_y * a + w.grad2_y * b));
        let rhs = a * m(&u.grad_y, &u.grad2_y) + b * m(&w.grad_y, &w.grad2_y);
        prop_assert!(rel(lhs, rhs) < 1e-12);
        let fl = |tp: &Mat<2>, tg: &Ten3<2>, th: &Ten4<2>| flow_integrand(&q, tp, tg, th, &p).unwrap();
        let lhs = fl(&(u.p * a + w.p * b), &(u.grad_p * a + w.grad_p * b), &(u.grad2_p * a + w.grad2_p * b));
        let rhs = a * fl(&u.p, &u.grad_p, &u.grad2_p) + b * fl(&w.p, &w.grad_p, &w.grad2_p);
        prop_assert!(rel(lhs, rhs) < 1e-12);
    }

    #[test]
    fn no_gradient_energy_means_no_hyperstress(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = MaterialParams { eps_g: 0.0, ..params() };
        let q: QuadState<3> = random_state(&mut rng);
        let k = PointKernel::new(&q, &p).unwrap();
        prop_assert_eq!(DrivingForces::new(&q, &p).unwrap().hyperstress, Ten3::zeros());
        prop_assert_eq!(k.mom_hess, Ten3::zeros());
        prop_assert_eq!(k.flow_grad, Ten3::zeros());
    }

    #[test]
    fn no_kelvin_voigt_viscosity_means_no_viscous_stress(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = MaterialParams { nu_kv: 0.0, ..params() };
        let q: QuadState<2> = random_state(&mut rng);
        let f = DrivingForces::new(&q, &p).unwrap();
        prop_assert_eq!(f.kv_stress, Mat::zeros());
        prop_assert_eq!(f.kv_flow, Mat::zeros());
    }
}

#[test]
fn reference_state_has_no_driving_forces() {
    let p = params();
    let k = PointKernel::new(&QuadState::<3>::reference(), &p).unwrap();
    assert_eq!(k.mom_grad, Mat::zeros());
    assert_eq!(k.mom_hess, Ten3::zeros());
    assert_eq!(k.flow_val, Mat::zeros());
    assert_eq!(k.flow_grad, Ten3::zeros());
    assert_eq!(k.flow_hess, Ten4::zeros());
}

/// Independent loop-level evaluation of `2∇yΠ⁻¹ΣΠ⁻ᵀ` and `−2C_elΣΠ⁻ᵀ`.
#[test]
fn viscous_forces_match_an_explicit_index_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = params();
    for _ in 0..20 {
        let q: QuadState<3> = random_state(&mut rng);
        let pi = q.p.inverse().unwrap().0;
        let gy = q.grad_y.0;
        let mut fe = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for m in 0..3 {
                    fe[i][j] += gy[i][m] * pi[m][j];
                }
            }
        }
        let mut c = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for m in 0..3 {
                    c[i][j] += fe[m][i] * fe[m][j];
                }
            }
        }
        let sigma = (cel_rate(&q).unwrap() * p.nu_kv).0;
        let f = DrivingForces::new(&q, &p).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                let mut fl = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        s += 2.0 * fe[i][a] * sigma[a][b] * pi[j][b];
                        fl -= 2.0 * c[i][a] * sigma[a][b] * pi[j][b];
                    }
                }
                assert!((f.kv_stress.0[i][j] - s).abs() < 1e-12 * (1.0 + s.abs()));
                assert!((f.kv_flow.0[i][j] - fl).abs() < 1e-12 * (1.0 + fl.abs()));
            }
        }
    }
}

#[test]
fn finite_difference_suite_2d() {
    let r = fd_check_all(7, 20, Dim::Two).unwrap();
    for (name, err) in r.families() {
        assert!(err <= 1e-5, "{name}: {err:e}");
    }
}

#[test]
fn finite_difference_suite_3d() {
    let p = MaterialParams {
        p_g: 4.0,
        r_el: 13.0,
        s_h: 7.0,
        ..MaterialParams::default()
    };
    let r = fd_check::<3>(3, 20, &p).unwrap();
    for (name, err) in r.families() {
        assert!(err <= 1e-5, "{name}: {err:e}");
    }
}

#[test]
fn finite_difference_suite_is_reproducible() {
    let a = fd_check_all(42, 5, Dim::Two).unwrap();
    let b = fd_check_all(42, 5, Dim::Two).unwrap();
    assert_eq!(a.families(), b.families());
}
