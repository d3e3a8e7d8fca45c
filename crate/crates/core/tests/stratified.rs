use proptest::prelude::*;
use rheo_core::stratified::{
    audit, log_time_grid, mean_rate_gradient, mean_slip_gradient, plastic_strain_stripe,
    regularizer_density, stripe_energy, Classification, ProfileKind, RegularizerKind, SlipProfile,
};

/// `g(x) = tanh(x/w)/tanh(ℓ/w)`, written out independently of the library.
fn g_tanh(x: f64, ell: f64, w: f64) -> f64 {
    (x / w).tanh() / (ell / w).tanh()
}

fn g_second_fd(x: f64, ell: f64, w: f64) -> f64 {
    let h = 1e-4 * w;
    (g_tanh(x + h, ell, w) - 2.0 * g_tanh(x, ell, w) + g_tanh(x - h, ell, w)) / (h * h)
}

fn g_first_fd(x: f64, ell: f64, w: f64) -> f64 {
    let h = 1e-5 * w;
    (g_tanh(x + h, ell, w) - g_tanh(x - h, ell, w)) / (2.0 * h)
}

/// Adaptive Simpson quadrature, used as an oracle for the Gauss rules.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

fn profiles() -> impl Strategy<Value = SlipProfile> {
    prop_oneof![
        (0.2f64..3.0).prop_map(SlipProfile::linear),
        (0.2f64..3.0, 0.05f64..1.0).prop_map(|(l, w)| SlipProfile::tanh(l, w)),
    ]
}

proptest! {
    #[test]
    fn stripe_strain_is_unimodular(prof in profiles(), t in 0.0f64..100.0, s in -1.0f64..1.0) {
        let x2 = s * prof.ell;
        prop_assert_eq!(plastic_strain_stripe(&prof, t, x2).det(), 1.0);
    }

    #[test]
    fn densities_are_linear_in_kappa(prof in profiles(), t in 0.1f64..50.0, s in -1.0f64..1.0, kappa in 1e-4f64..10.0) {
        let x2 = s * prof.ell;
        for kind in RegularizerKind::ALL {
            let one = regularizer_density(kind, &prof, t, x2, 1.0);
            let scaled = regularizer_density(kind, &prof, t, x2, kappa);
            prop_assert!((scaled - kappa * one).abs() <= 1e-12 * (1.0 + scaled.abs()));
        }
    }

    #[test]
    fn metric_density_dominates_standard(prof in profiles(), t in 0.0f64..50.0, s in -1.0f64..1.0) {
        let x2 = s * prof.ell;
        let metric = regularizer_density(RegularizerKind::MetricTensor, &prof, t, x2, 1.0);
        let standard = regularizer_density(RegularizerKind::StandardGradP, &prof, t, x2, 1.0);
        prop_assert!(metric >= standard);
    }

    #[test]
    fn rate_gradient_energy_is_time_independent(prof in profiles(), t in 0.1f64..100.0) {
        let e1 = stripe_energy(RegularizerKind::GradPdot, &prof, 1.0, 1.0, 24);
        let et = stripe_energy(RegularizerKind::GradPdot, &prof, t, 1.0, 24);
        prop_assert!((et - e1).abs() <= 1e-12 * e1.max(1e-300));
    }

    #[test]
    fn mean_gradients_do_not_depend_on_the_profile(ell in 0.2f64..3.0, w in 0.05f64..1.0, t in 0.0f64..100.0) {
        let (lin, tanh) = (SlipProfile::linear(ell), SlipProfile::tanh(ell, w));
        prop_assert!((mean_rate_gradient(&lin, t).0[0][1] - 1.0 / ell).abs() <= 1e-12);
        prop_assert!((mean_rate_gradient(&tanh, t).0[0][1] - 1.0 / ell).abs() <= 1e-12);
        prop_assert!((mean_slip_gradient(&lin, t) - t / ell).abs() <= 1e-12 * (1.0 + t / ell));
        prop_assert!((mean_slip_gradient(&tanh, t) - t / ell).abs() <= 1e-12 * (1.0 + t / ell));
    }
}

#[test]
fn standard_density_matches_differentiated_profile() {
    let (ell, w, kappa) = (1.0, 0.2, 0.7);
    let prof = SlipProfile::tanh(ell, w);
    for t in [0.5, 3.0, 40.0] {
        for x2 in [-0.8, -0.25, -0.05, 0.0, 0.1, 0.33, 0.9] {
            let g2 = g_second_fd(x2, ell, w);
            let expected = 0.5 * kappa * t * t * g2 * g2;
            let got = regularizer_density(RegularizerKind::StandardGradP, &prof, t, x2, kappa);
            assert!(
                (got - expected).abs() <= 1e-5 * (1.0 + expected),
                "t={t} x2={x2}: {got} vs {expected}"
            );
        }
    }
}

#[test]
fn push_forward_and_metric_densities_follow_the_component_formulas() {
    let (ell, w) = (1.0, 0.2);
    let prof = SlipProfile::tanh(ell, w);
    for t in [0.5, 7.0] {
        for x2 in [-0.6, -0.1, 0.05, 0.4] {
            let (g1, g2) = (g_first_fd(x2, ell, w), g_second_fd(x2, ell, w));
            let (a, b) = (t * g2, t * g1 * t * g2);
            let push = 0.5 * (a * a + b * b);
            let metric = 0.5 * (2.0 * a * a + 4.0 * b * b);
            let got_push = regularizer_density(RegularizerKind::PushForward, &prof, t, x2, 1.0);
            let got_metric = regularizer_density(RegularizerKind::MetricTensor, &prof, t, x2, 1.0);
            assert!(
                (got_push - push).abs() <= 1e-5 * (1.0 + push),
                "{got_push} vs {push}"
            );
            assert!(
                (got_metric - metric).abs() <= 1e-5 * (1.0 + metric),
                "{got_metric} vs {metric}"
            );
        }
    }
}

#[test]
fn linear_profile_has_no_strain_gradient() {
    let prof = SlipProfile::linear(1.5);
    for kind in [
        RegularizerKind::StandardGradP,
        RegularizerKind::PushForward,
        RegularizerKind::MetricTensor,
    ] {
        assert_eq!(stripe_energy(kind, &prof, 10.0, 1.0, 16), 0.0);
    }
}

#[test]
fn standard_energy_matches_adaptive_quadrature() {
    let (ell, w, kappa) = (1.0, 0.2, 1.0);
    let prof = SlipProfile::tanh(ell, w);
    // Exact g'' of the library profile, evaluated by an independent adaptive rule.
    let g2 = |x: f64| {
        let th = (x / w).tanh();
        -2.0 * th * (1.0 - th * th) / (w * w * (ell / w).tanh())
    };
    let c = 0.5 * kappa * adaptive_simpson(&|x| g2(x) * g2(x), -ell, ell, 1e-13);
    for t in [1.0, 10.0, 100.0] {
        let e = stripe_energy(RegularizerKind::StandardGradP, &prof, t, kappa, 16);
        assert!(
            ((e - c * t * t) / (c * t * t)).abs() <= 1e-8,
            "t={t}: {e} vs {}",
            c * t * t
        );
    }
}

#[test]
fn mean_slip_gradient_matches_quadrature_of_the_shear() {
    let (ell, w, t) = (1.0, 0.2, 3.0);
    let prof = SlipProfile::tanh(ell, w);
    let integral = adaptive_simpson(
        &|x| plastic_strain_stripe(&prof, t, x).0[0][1],
        -ell,
        ell,
        1e-14,
    );
    assert!((integral / (2.0 * ell) - mean_slip_gradient(&prof, t)).abs() <= 1e-12);
}

#[test]
fn audit_classifies_every_candidate() {
    let profiles = [SlipProfile::linear(1.0), SlipProfile::tanh(1.0, 0.2)];
    let times = log_time_grid(1.0, 100.0, 41);
    let report = audit(&profiles, &RegularizerKind::ALL, &times, 1.0, 32).unwrap();
    let class = |p, k| report.find(p, k).unwrap().classification;
    for k in [
        RegularizerKind::GradFel,
        RegularizerKind::CurlP,
        RegularizerKind::PCurlP,
    ] {
        for p in [ProfileKind::Linear, ProfileKind::Tanh] {
            assert_eq!(class(p, k), Classification::Vanishes);
            assert!(report
                .find(p, k)
                .unwrap()
                .energies
                .iter()
                .all(|e| *e <= 1e-12));
        }
    }
    let Classification::Grows(e) = class(ProfileKind::Tanh, RegularizerKind::StandardGradP) else {
        panic!("standard choice should grow");
    };
    assert!((e - 2.0).abs() <= 0.05);
    for k in [RegularizerKind::PushForward, RegularizerKind::MetricTensor] {
        let Classification::Grows(e) = class(ProfileKind::Tanh, k) else {
            panic!("{k:?} should grow");
        };
        assert!((e - 4.0).abs() <= 0.10, "{k:?}: {e}");
    }
    assert_eq!(
        class(ProfileKind::Tanh, RegularizerKind::GradPdot),
        Classification::Bounded
    );
    // Without a slip band the standard choice does not harden at all.
    assert_eq!(
        class(ProfileKind::Linear, RegularizerKind::StandardGradP),
        Classification::Vanishes
    );
}

#[test]
fn classifications_survive_a_small_coefficient() {
    let profiles = [SlipProfile::linear(1.0), SlipProfile::tanh(1.0, 0.2)];
    let times = log_time_grid(1.0, 100.0, 41);
    let a = audit(&profiles, &RegularizerKind::ALL, &times, 1.0, 32).unwrap();
    let b = audit(&profiles, &RegularizerKind::ALL, &times, 1e-3, 32).unwrap();
    for (x, y) in a.series.iter().zip(&b.series) {
        assert!(
            x.classification.same_kind(&y.classification),
            "{:?}",
            x.kind
        );
        assert!((x.exponent - y.exponent).abs() < 1e-9);
    }
}

#[test]
fn inelastic_constraint_is_constant_on_the_stripe() {
    let p = rheo_core::constitutive::MaterialParams::default();
    let prof = SlipProfile::tanh(1.0, 0.2);
    for t in [0.0, 1.0, 50.0] {
        for x2 in [-1.0, -0.3, 0.0, 0.7] {
            let pm = plastic_strain_stripe(&prof, t, x2);
            assert_eq!(rheo_core::constitutive::fh_eval(&pm, &p), p.delta);
        }
    }
}
