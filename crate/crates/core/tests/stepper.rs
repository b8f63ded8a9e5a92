use nsdb::assembly::{apply_boundary_conditions, assemble_temperature, weak_residual};
use nsdb::config::buoyant_cavity;
use nsdb::diagnostics::{temperature_decay_check, total_energy};
use nsdb::experiments::build_setup;
use nsdb::fem::{build_dof_map, interpolate_scalar, Field};
use nsdb::linalg::dense_solve;
use nsdb::mesh::{build_decomposed_mesh, GeometrySpec};
use nsdb::model::{make_material, poincare_constant, MaterialSpec, SchemeParams};
use nsdb::state::State;
use nsdb::stepper::{initial_state, picard_advance, simulate, Problem, RunOptions};

fn problem(nx: usize, buoyancy: bool) -> Problem {
    let mesh = build_decomposed_mesh(GeometrySpec::new(1.0, 0.5, 0.5).unwrap(), nx, nx / 2, nx / 2).unwrap();
    let dofs = build_dof_map(&mesh);
    let material = make_material(&MaterialSpec::constant(1.0, 1.0, 1e-2, 1.0, 1.0), &mesh).unwrap();
    let mut params = SchemeParams::new(1e-2, 1e-3, 1.0, 1.0, 1.0);
    params.buoyancy = buoyancy;
    Problem { mesh, dofs, material, params }
}

fn bump_theta(p: &Problem) -> Vec<f64> {
    interpolate_scalar(&p.mesh, &p.dofs.temperature, |x| {
        (std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * x[1]).sin() + 0.3 * x[0] * x[1] * (1.0 - x[1])
    })
    .unwrap()
}

#[test]
fn zero_state_is_a_one_iteration_fixed_point() {
    let p = problem(4, true);
    let s = State::zeros(&p.dofs, 0.0);
    let (next, diag) = picard_advance(&s, &p.params, &p.material, &p.mesh, &p.dofs).unwrap();
    assert_eq!(diag.picard_iters, 1);
    assert_eq!(next.max_abs(), 0.0);
    assert!((next.t - 0.01).abs() < 1e-15);
}

#[test]
fn pure_diffusion_step_is_the_backward_euler_heat_solve() {
    let p = problem(4, false);
    let mut s = State::zeros(&p.dofs, 0.0);
    s.theta = bump_theta(&p);
    let s = initial_state(s, &p).unwrap();
    let (next, _) = picard_advance(&s, &p.params, &p.material, &p.mesh, &p.dofs).unwrap();
    assert_eq!(next.u_f.iter().chain(&next.u_m).fold(0.0_f64, |m, v| m.max(v.abs())), 0.0);

    let zf = vec![0.0; p.dofs.field_len(Field::VelocityFree)];
    let zm = vec![0.0; p.dofs.field_len(Field::VelocityMatrix)];
    let sys = apply_boundary_conditions(
        &assemble_temperature(&s, &zf, &zm, &p.params, &p.material, &p.mesh, &p.dofs).unwrap(),
        &p.mesh,
        &p.dofs,
    )
    .unwrap();
    let oracle = sys.expand(&dense_solve(&sys.matrix, &sys.rhs).unwrap());
    let err = next.theta.iter().zip(&oracle).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err <= 10.0 * p.params.picard_tol, "deviation {err}");
}

#[test]
fn eigenmode_decays_by_the_backward_euler_factor() {
    let p = problem(8, false);
    let pc = poincare_constant(&p.mesh, &p.dofs).unwrap();
    let mut s = State::zeros(&p.dofs, 0.0);
    s.theta = pc.mode.clone();
    let (next, _) = picard_advance(&s, &p.params, &p.material, &p.mesh, &p.dofs).unwrap();
    let factor = 1.0 / (1.0 + p.params.delta * pc.eigenvalue);
    let err = next.theta.iter().zip(&pc.mode).fold(0.0_f64, |m, (a, b)| m.max((a - factor * b).abs()));
    assert!(err <= 1e-7, "deviation {err}");
}

#[test]
fn buoyant_cavity_step_converges_with_nonnegative_slack() {
    let setup = build_setup(&buoyant_cavity(1.0, 16)).unwrap();
    let Problem { mesh, dofs, material, params } = &setup.problem;
    let (_, diag) = picard_advance(&setup.initial, params, material, mesh, dofs).unwrap();
    let e0 = total_energy(&setup.initial, params.sigma, params.varpi, mesh, dofs).e_sigma;
    assert!(diag.picard_iters <= 25, "{} Picard iterations", diag.picard_iters);
    assert!(diag.energy.slack.unwrap() >= -1e-8 * e0);
    assert!(diag.update_history.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn converged_step_has_small_residual_and_perturbation_raises_it() {
    let setup = build_setup(&buoyant_cavity(1.0, 8)).unwrap();
    let Problem { mesh, dofs, material, params } = &setup.problem;
    let (next, diag) = picard_advance(&setup.initial, params, material, mesh, dofs).unwrap();
    let bound = 10.0 * (params.picard_tol + params.linear_tol);
    assert!(diag.residual_momentum <= bound && diag.residual_temperature <= bound, "{diag:?}");
    let mut bad = next.clone();
    let free = (0..bad.theta.len()).find(|&c| !dofs.is_constrained(Field::Temperature, c)).unwrap();
    bad.theta[free] += 1e-3;
    let (_, rt) = weak_residual(&setup.initial, &bad, params, material, mesh, dofs).unwrap();
    assert!(rt >= 10.0 * diag.residual_temperature.max(1e-300), "{rt} vs {}", diag.residual_temperature);
}

#[test]
fn temperature_estimate_holds_without_flow() {
    let mut p = problem(8, false);
    p.params.final_time = 1.0;
    let mut s = State::zeros(&p.dofs, 0.0);
    s.theta = bump_theta(&p);
    let s = initial_state(s, &p).unwrap();
    let traj = simulate(&p, s, &RunOptions::default());
    assert!(traj.completed());
    assert_eq!(traj.num_steps(), 100);
    assert!(temperature_decay_check(&traj.states, &p.material, &p.mesh, &p.dofs) <= 1e-12);
}

#[test]
fn failed_steps_abort_the_run_and_keep_the_partial_trajectory() {
    let mut p = problem(4, true);
    p.params.picard_max = 1;
    let mut s = State::zeros(&p.dofs, 0.0);
    s.theta = bump_theta(&p);
    let s = initial_state(s, &p).unwrap();
    let traj = simulate(&p, s, &RunOptions::default());
    assert!(!traj.completed());
    assert_eq!(traj.states.len(), 1);
    assert!(traj.aborted.as_deref().unwrap().contains("Picard"), "{:?}", traj.aborted);
}

#[test]
fn trajectory_times_follow_the_step_size() {
    let mut p = problem(4, true);
    p.params.final_time = 0.05;
    let mut s = State::zeros(&p.dofs, 0.0);
    s.theta = bump_theta(&p);
    let s = initial_state(s, &p).unwrap();
    let traj = simulate(&p, s, &RunOptions::default());
    assert_eq!(traj.num_steps(), 5);
    for (k, st) in traj.states.iter().enumerate() {
        assert!((st.t - 0.01 * k as f64).abs() < 1e-14);
    }
    for (k, d) in traj.diagnostics.iter().enumerate() {
        assert_eq!(d.step, k + 1);
    }
}

#[test]
fn converged_step_satisfies_the_diagonal_energy_identity() {
    let setup = build_setup(&buoyant_cavity(1.0, 8)).unwrap();
    let Problem { mesh, dofs, material, params } = &setup.problem;
    let s0 = &setup.initial;
    let (s1, diag) = picard_advance(s0, params, material, mesh, dofs).unwrap();
    let e = &diag.energy;
    let e0 = total_energy(s0, params.sigma, params.varpi, mesh, dofs).e_sigma;
    // Testing each equation with its own unknown: full dissipation on the
    // left, buoyancy work of the new state on the right.
    let d_full = e.d_viscous + e.d_darcy + e.d_bjsj + e.d_brinkman + e.d_thermal;
    let lhs = e.e_sigma - e0 + e.inc_f + e.inc_m + e.inc_theta + params.delta * d_full;
    let rhs = params.delta * e.production;
    let scale = 1.0 + s1.max_abs();
    assert!((lhs - rhs).abs() <= 10.0 * (params.picard_tol + params.linear_tol) * scale, "{lhs} vs {rhs}");
}
