use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rheo_core::config::parse_config_str;
use rheo_core::constitutive::MaterialParams;
use rheo_core::galerkin::assembly::block;
use rheo_core::galerkin::project::l2_project;
use rheo_core::galerkin::simulate::{build_problem, initial_checkpoint};
use rheo_core::galerkin::space::{matrix_at, vector_at};
use rheo_core::galerkin::{
    run_time_loop, simulate, step_implicit_euler, Grid, Loads, Mode, Problem, Side, SolverSettings,
    SplineSpace, StepContext, SystemState, TimeControl, TimeFunction, VectorLoad,
};
use rheo_core::io::read_dump;
use rheo_core::Error;

fn grid(cells: usize, periodic: [bool; 2]) -> Grid {
    Grid {
        lengths: vec![1.0, 1.0],
        cells: vec![cells, cells],
        periodic: periodic.to_vec(),
    }
}

fn params() -> MaterialParams {
    MaterialParams {
        p_g: 4.0,
        ..MaterialParams::default()
    }
}

/// `|∫A:∇v + ∫div A·v|` for random spline fields on a periodic grid.
#[test]
fn green_formula_holds_on_periodic_grids() {
    let space = SplineSpace::<2>::new(&grid(16, [true, true]), 4).unwrap();
    let nb = space.num_basis();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let a: Vec<f64> = (0..nb * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..nb * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (mut bulk, mut div) = (0.0, 0.0);
        for c in 0..space.num_cells() {
            let cb = space.cell_basis(c);
            for pb in &cb.points {
                let am = matrix_at(&a, 4, 0, &cb.index, pb);
                let vv = vector_at(&v, 2, 0, &cb.index, pb);
                bulk += pb.weight * am.value.ddot(&vv.grad);
                for i in 0..2 {
                    let d: f64 = (0..2).map(|j| am.grad.0[i][j][j]).sum();
                    div += pb.weight * d * vv.value[i];
                }
            }
        }
        assert!((bulk + div).abs() <= 1e-10, "{:e}", bulk + div);
        assert!(bulk.abs() > 1e-3, "the test fields should not be trivial");
    }
}

fn projection_error(cells: usize) -> f64 {
    let space = SplineSpace::<2>::new(&grid(cells, [false, false]), 5).unwrap();
    let f = |x: [f64; 2]| (2.0 * PI * x[0]).sin() * (PI * x[1]).cos() + x[0] * x[1];
    let coef = l2_project(&space, 1, |x, out| out[0] = f(x)).unwrap();
    let mut err = 0.0;
    for c in 0..space.num_cells() {
        let cb = space.cell_basis(c);
        for pb in &cb.points {
            let uh: f64 = cb
                .index
                .iter()
                .enumerate()
                .map(|(l, &a)| coef[a] * pb.value[l])
                .sum();
            err += pb.weight * (uh - f(pb.x)).powi(2);
        }
    }
    err.sqrt()
}

#[test]
fn cubic_projection_converges_at_fourth_order() {
    let errs: Vec<f64> = [4, 8, 16].iter().map(|&n| projection_error(n)).collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 3.7, "observed order {order} from {errs:?}");
    }
}

#[test]
fn basis_integrals_sum_to_the_volume() {
    for periodic in [[true, false], [false, false], [true, true]] {
        let g = Grid {
            lengths: vec![2.0, 0.5],
            cells: vec![5, 4],
            periodic: periodic.to_vec(),
        };
        let space = SplineSpace::<2>::new(&g, 3).unwrap();
        let total: f64 = space.integrate_basis().iter().sum();
        assert!((total - 1.0).abs() < 1e-13, "{periodic:?}: {total}");
    }
}

#[test]
fn side_integrals_sum_to_the_face_length() {
    let g = Grid {
        lengths: vec![2.0, 0.5],
        cells: vec![5, 4],
        periodic: vec![true, false],
    };
    let space = SplineSpace::<2>::new(&g, 3).unwrap();
    let top: f64 = space
        .integrate_basis_on_side(Side {
            dir: 1,
            upper: true,
        })
        .unwrap()
        .iter()
        .sum();
    assert!((top - 2.0).abs() < 1e-13);
    assert!(space
        .integrate_basis_on_side(Side {
            dir: 0,
            upper: true
        })
        .is_err());
}

#[test]
fn three_dimensional_space_reproduces_linear_fields() {
    let g = Grid {
        lengths: vec![1.0, 2.0, 1.0],
        cells: vec![2, 3, 2],
        periodic: vec![false, false, false],
    };
    let space = SplineSpace::<3>::new(&g, 3).unwrap();
    let coef = l2_project(&space, 1, |x, out| {
        out[0] = 1.0 + x[0] - 2.0 * x[1] + 0.5 * x[2]
    })
    .unwrap();
    let (index, pb) = space.point_basis([0.3, 1.7, 0.9]);
    let v: f64 = index
        .iter()
        .enumerate()
        .map(|(l, &a)| coef[a] * pb.value[l])
        .sum();
    assert!((v - (1.0 + 0.3 - 3.4 + 0.45)).abs() < 1e-11);
}

#[test]
fn uniform_body_force_enters_the_residual_with_its_total() {
    let space = SplineSpace::<2>::new(&grid(4, [true, false]), 4).unwrap();
    let f = [0.3, -0.7];
    let loads = Loads {
        body_force: Some(VectorLoad {
            vector: f.to_vec(),
            amplitude: TimeFunction::Constant(1.0),
        }),
        ..Loads::default()
    };
    let problem = Problem::new(
        space,
        params(),
        Mode::QuasiStatic,
        loads,
        SolverSettings::default(),
    )
    .unwrap();
    let nb = problem.space.num_basis();
    let state = SystemState::reference(nb, 2);
    let z = problem.pack(&state.u_coef, &state.p_coef);
    let r = problem
        .raw_residual(
            &z,
            &StepContext {
                prev: &state,
                dt: 0.1,
            },
        )
        .unwrap();
    let b = block(2);
    for i in 0..2 {
        let total: f64 = (0..nb).map(|a| r[a * b + i]).sum();
        assert!((total + f[i]).abs() < 1e-13, "component {i}: {total}");
    }
    // Π = I up to the rounding of the partition of unity.
    let flow = (0..nb)
        .flat_map(|a| (2..b).map(move |c| a * b + c))
        .fold(0.0f64, |m, k| m.max(r[k].abs()));
    assert!(flow <= 1e-14, "{flow:e}");
}

#[test]
fn reference_state_is_an_exact_equilibrium() {
    let space = SplineSpace::<2>::new(&grid(8, [true, false]), 4).unwrap();
    let problem = Problem::new(
        space,
        params(),
        Mode::Dynamic,
        Loads::default(),
        SolverSettings::default(),
    )
    .unwrap();
    let nb = problem.space.num_basis();
    let start = SystemState::reference(nb, 2);
    let z = problem.pack(&start.u_coef, &start.p_coef);
    let r = problem
        .raw_residual(
            &z,
            &StepContext {
                prev: &start,
                dt: 0.02,
            },
        )
        .unwrap();
    assert!(r.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= 1e-12);

    let energy = problem.energies(&start).unwrap();
    let mut state = start.clone();
    let mut account = rheo_core::galerkin::EnergyAccount::starting_from(&energy);
    for _ in 0..10 {
        let (s, a, report) = step_implicit_euler(&problem, &state, &account, 0.02).unwrap();
        assert!(report.initial_residual <= 1e-12);
        state = s;
        account = a;
    }
    assert!(state.max_abs_diff(&start) <= 1e-10);
}

fn ramp_config(extra: &str) -> String {
    format!(
        "mode = dynamic\n\
         grid.cells = 4, 4\n\
         material.p_g = 4\n\
         initial.v = shear:0.2\n\
         loads.dirichlet.x2_min = 0, 0\n\
         loads.dirichlet.x2_max = 1, 0\n\
         loads.dirichlet.x2_max.amplitude = 0:0, 1:0.2\n\
         time.dt0 = 0.02\n\
         {extra}\n"
    )
}

#[test]
fn prescribed_boundary_values_hold_exactly() {
    let cfg = parse_config_str(&ramp_config("time.T = 0.1")).unwrap();
    let problem = build_problem::<2>(&cfg).unwrap();
    let mut cp = initial_checkpoint(&cfg, &problem).unwrap();
    let control = TimeControl {
        t_end: 0.1,
        dt_max: 0.02,
        dt_min: 1e-8,
    };
    run_time_loop(&problem, &mut cp, &control, |_, _| Ok(())).unwrap();
    let t = cp.state.t;
    for x1 in [0.0, 0.13, 0.5, 0.77] {
        for (x2, shift) in [(0.0, 0.0), (1.0, 0.2 * t)] {
            let (index, pb) = problem.space.point_basis([x1, x2]);
            let u = vector_at(&cp.state.u_coef, 2, 0, &index, &pb).value;
            assert!(
                (u[0] - shift).abs() < 1e-14 && u[1].abs() < 1e-14,
                "({x1}, {x2}): {u:?}"
            );
        }
    }
}

#[test]
fn restarting_from_a_dump_is_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let full = parse_config_str(&ramp_config("time.T = 0.2\noutput.every = 5")).unwrap();
    let a = simulate(&full, Some(&dir.path().join("a")), None).unwrap();

    let half = parse_config_str(&ramp_config("time.T = 0.1\noutput.every = 5")).unwrap();
    let b = simulate(&half, Some(&dir.path().join("b")), None).unwrap();
    let dump = b.dumps.last().unwrap().clone();
    let resumed_text = ramp_config("time.T = 0.2\noutput.every = 5")
        .replace("initial.v = shear:0.2\n", "")
        + &format!("initial.y = file:{}\n", dump.display());
    let resumed = parse_config_str(&resumed_text).unwrap();
    let c = simulate(&resumed, Some(&dir.path().join("c")), None).unwrap();

    assert_eq!(a.final_checkpoint, c.final_checkpoint);
    let (_, from_a) = read_dump(a.dumps.last().unwrap()).unwrap();
    let (_, from_c) = read_dump(c.dumps.last().unwrap()).unwrap();
    assert_eq!(from_a, from_c);
    let tail_a: Vec<String> = a.rows[6..]
        .iter()
        .map(rheo_core::io::energy_csv_row)
        .collect();
    let tail_c: Vec<String> = c.rows[1..]
        .iter()
        .map(rheo_core::io::energy_csv_row)
        .collect();
    assert_eq!(tail_a, tail_c);
}

#[test]
fn determinant_breach_rejects_steps_instead_of_writing_them() {
    // The ramp drives det Π slightly below one, so this threshold must eventually fail.
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config_str(&ramp_config("time.T = 1\nsolver.det_threshold = 0.99999")).unwrap();
    let err = simulate(&cfg, Some(dir.path()), None).unwrap_err();
    assert!(matches!(err, Error::StepCollapsed { .. }), "{err}");
    let rows = rheo_core::io::read_energy_csv(&dir.path().join("energy.csv")).unwrap();
    assert!(rows.len() > 1);
    for r in &rows {
        assert!(
            r.min_det_p >= 0.99999 && r.min_det_grad_y >= 0.99999,
            "{r:?}"
        );
    }
    assert!(dir.path().join("fields_failed.dump").exists());
}

fn traction_creep_residual(dt: f64) -> (f64, f64) {
    let text = format!(
        "mode = quasi_static\n\
         grid.cells = 4, 2\n\
         material.p_g = 4\n\
         loads.dirichlet.x2_min = 0, 0\n\
         loads.traction.x2_max = 0.001, 0\n\
         loads.traction.x2_max.amplitude = 0:0, 0.2:1\n\
         time.T = 0.4\n\
         time.dt0 = {dt}\n"
    );
    let dir = tempfile::tempdir().unwrap();
    let run = simulate(&parse_config_str(&text).unwrap(), Some(dir.path()), None).unwrap();
    let last = run.rows.last().unwrap();
    (last.balance_residual.abs(), last.energy.external_work)
}

#[test]
fn traction_creep_balance_residual_is_first_order() {
    let (coarse, work) = traction_creep_residual(0.02);
    let (fine, _) = traction_creep_residual(0.01);
    assert!(work > 0.0);
    assert!(coarse <= 0.05 * work, "{coarse:e} vs work {work:e}");
    let ratio = coarse / fine;
    assert!((1.5..=2.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn periodic_directions_need_four_cells() {
    let g = Grid {
        lengths: vec![1.0, 1.0],
        cells: vec![3, 4],
        periodic: vec![true, false],
    };
    assert!(SplineSpace::<2>::new(&g, 4).is_err());
}

#[test]
fn residual_is_insensitive_to_extra_quadrature_on_smooth_states() {
    let g = grid(8, [true, false]);
    let residual = |points: usize| {
        let space = SplineSpace::<2>::new(&g, points).unwrap();
        let prev = rheo_core::galerkin::project_initial(
            &space,
            |x| {
                [
                    x[0] + 1e-3 * (2.0 * PI * x[0]).sin() * x[1],
                    x[1] + 1e-3 * x[1] * x[1],
                ]
            },
            |x| [1e-3 * x[1], 0.0],
            |x| {
                let s = 1e-3 * (2.0 * PI * x[0]).cos();
                rheo_core::tensor::Mat([[1.0, s], [0.0, 1.0]])
            },
            1e-6,
        )
        .unwrap();
        let problem = Problem::new(
            space,
            params(),
            Mode::Dynamic,
            Loads::default(),
            SolverSettings::default(),
        )
        .unwrap();
        let mut next = prev.clone();
        next.t += 0.01;
        for (a, b) in next.u_coef.iter_mut().zip(&prev.v_coef) {
            *a += 0.01 * b;
        }
        let z = problem.pack(&next.u_coef, &next.p_coef);
        problem
            .raw_residual(
                &z,
                &StepContext {
                    prev: &prev,
                    dt: 0.01,
                },
            )
            .unwrap()
    };
    let (coarse, fine) = (residual(4), residual(8));
    let scale = coarse.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = coarse
        .iter()
        .zip(&fine)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(scale > 1e-8, "the state should not be in equilibrium");
    assert!(diff <= 1e-10, "{diff:e} (residual scale {scale:e})");
}
