use nsdb::config::manufactured;
use nsdb::experiments::{build_setup, manufactured_state, mms_errors};
use nsdb::manufactured::Manufactured;
use nsdb::stepper::{initial_state, picard_advance};

fn exact_for(cfg: &nsdb::config::RunConfig) -> Manufactured {
    Manufactured::new(&cfg.geometry.spec().unwrap(), 1.0, 1.0, 1.0, 1.0, cfg.scheme.xi)
}

#[test]
fn one_small_step_stays_near_the_interpolant() {
    let mut cfg = manufactured(vec![8, 16, 32]);
    cfg.scheme.delta = 1e-3;
    let setup = build_setup(&cfg).unwrap();
    let p = &setup.problem;
    let exact = exact_for(&cfg);
    let s0 = initial_state(manufactured_state(&exact, &p.mesh, &p.dofs, 0.0).unwrap(), p).unwrap();
    let (s1, _) = picard_advance(&s0, &p.params, &p.material, &p.mesh, &p.dofs).unwrap();
    let step = mms_errors(&s1, &exact, &p.mesh, &p.dofs);
    let interp = mms_errors(&manufactured_state(&exact, &p.mesh, &p.dofs, s1.t).unwrap(), &exact, &p.mesh, &p.dofs);
    assert!(step.velocity() <= 10.0 * interp.velocity(), "{step:?} vs {interp:?}");
    assert!(step.theta <= 10.0 * interp.theta, "{step:?} vs {interp:?}");
}

#[test]
fn exact_solution_is_clamped_on_the_outer_boundary() {
    let cfg = manufactured(vec![4, 8, 16]);
    let exact = exact_for(&cfg);
    let setup = build_setup(&cfg).unwrap();
    for &(x, y) in &[(0.0, 0.3), (1.0, 0.7), (0.4, 0.0), (0.6, 1.0)] {
        let region = exact.region([x, y]);
        let u = exact.velocity(region, [x, y], 0.37);
        assert!(u[0].abs() <= 1e-14 && u[1].abs() <= 1e-14, "{u:?} at ({x}, {y})");
        assert!(exact.theta([x, y], 0.37).abs() <= 1e-14);
    }
    assert!(setup.problem.params.has_sources());
}
