use std::sync::Arc;

use nsdb::diagnostics::{
    buoyancy_production, dissipation, energy_slack, gronwall_weight, korn_equivalence, temperature_decay_check,
    total_energy, uniqueness_metrics, z_norm_parts,
};
use nsdb::fem::{build_dof_map, field_norm, interpolate, interpolate_scalar, DofMap, Field, NormKind};
use nsdb::manufactured::Manufactured;
use nsdb::mesh::{build_decomposed_mesh, DecomposedMesh, GeometrySpec};
use nsdb::model::{make_material, MaterialModel, MaterialSpec, SchemeParams};
use nsdb::state::State;
use nsdb::stepper::{initial_state, picard_advance, Problem};
use proptest::prelude::*;

fn unit_mesh(nx: usize) -> (DecomposedMesh, DofMap) {
    let mesh = build_decomposed_mesh(GeometrySpec::new(1.0, 0.5, 0.5).unwrap(), nx, nx / 2, nx / 2).unwrap();
    let dofs = build_dof_map(&mesh);
    (mesh, dofs)
}

fn material(mesh: &DecomposedMesh, kappa: f64) -> MaterialModel {
    make_material(&MaterialSpec::constant(1.0, 1.0, kappa, 1.0, 1.0), mesh).unwrap()
}

/// Seven-point Gauss-Legendre on `[a, b]`.
fn gauss(a: f64, b: f64) -> Vec<(f64, f64)> {
    let x = [0.0, 0.405_845_151_377_397_2, 0.741_531_185_599_394_4, 0.949_107_912_342_758_5];
    let w = [0.417_959_183_673_469_4, 0.381_830_050_505_118_9, 0.279_705_391_489_276_7, 0.129_484_966_168_869_7];
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut out = vec![(m, h * w[0])];
    for i in 1..4 {
        out.push((m - h * x[i], h * w[i]));
        out.push((m + h * x[i], h * w[i]));
    }
    out
}

fn rect_integral(y: (f64, f64), f: impl Fn(f64, f64) -> f64) -> f64 {
    let mut s = 0.0;
    for (xi, wx) in gauss(0.0, 1.0) {
        for (yi, wy) in gauss(y.0, y.1) {
            s += wx * wy * f(xi, yi);
        }
    }
    s
}

#[test]
fn zero_state_has_zero_energy_and_dissipation() {
    let (mesh, dofs) = unit_mesh(2);
    let m = material(&mesh, 1.0);
    let s = State::zeros(&dofs, 0.0);
    let params = SchemeParams::new(0.1, 0.1, 2.0, 1.0, 1.0);
    let e = total_energy(&s, 2.0, 1.0, &mesh, &dofs);
    assert_eq!(e.e_sigma, 0.0);
    let d = dissipation(&s, &s, &m, &params, &mesh, &dofs);
    assert_eq!([d.viscous, d.darcy, d.bjsj, d.thermal, d.brinkman], [0.0; 5]);
    assert_eq!(buoyancy_production(&s, &mesh, &dofs), 0.0);
    assert_eq!(temperature_decay_check(&[s.clone(), s.clone(), s], &m, &mesh, &dofs), 0.0);
}

#[test]
fn kinetic_energy_of_an_interpolated_sine() {
    let (mesh, dofs) = unit_mesh(32);
    let mut s = State::zeros(&dofs, 0.0);
    s.u_f = interpolate(&mesh, &dofs.velocity_free, |p| {
        [(std::f64::consts::PI * p[0]).sin() * (std::f64::consts::PI * p[1]).sin(), 0.0]
    })
    .unwrap();
    let e = total_energy(&s, 1.0, 1.0, &mesh, &dofs);
    // 1/2 * int_0^1 sin^2(pi x) dx * int_{1/2}^1 sin^2(pi y) dy = 1/2 * 1/2 * 1/4
    assert!((e.kinetic_f - 0.0625).abs() <= 1e-6, "{}", e.kinetic_f);
}

#[test]
fn thermal_energy_is_sigma_weighted() {
    let (mesh, dofs) = unit_mesh(4);
    let mut s = State::zeros(&dofs, 0.0);
    s.theta = interpolate_scalar(&mesh, &dofs.temperature, |_| 1.0).unwrap();
    for &(c, _) in &dofs.field(Field::Temperature).constrained {
        s.theta[c] = 0.0;
    }
    let n = field_norm(&mesh, &dofs.temperature, &s.theta, NormKind::L2).unwrap();
    let e = total_energy(&s, 2.0, 1.0, &mesh, &dofs);
    assert!((e.thermal - n * n).abs() <= 1e-15);
}

#[test]
fn rigid_slip_gives_the_bjsj_coefficient() {
    let (mesh, dofs) = unit_mesh(4);
    let m = material(&mesh, 1.0);
    let mut s = State::zeros(&dofs, 0.0);
    for (i, v) in s.u_f.iter_mut().enumerate() {
        *v = if i % 2 == 0 { 1.0 } else { 0.0 };
    }
    let params = SchemeParams::new(0.1, 0.0, 1.0, 1.0, 1.0);
    let d = dissipation(&s, &s, &m, &params, &mesh, &dofs);
    assert!((d.bjsj - 0.5_f64.sqrt()).abs() <= 1e-14, "{}", d.bjsj);
    assert!(d.viscous.abs() <= 1e-28);
}

#[test]
fn dissipation_components_match_quadrature_of_polynomials() {
    let (mesh, dofs) = unit_mesh(2);
    let kappa = 0.5;
    let m = material(&mesh, kappa);
    let (xi, sigma) = (0.2, 3.0);
    let params = SchemeParams::new(0.1, xi, sigma, 1.0, 1.0);
    let mut s = State::zeros(&dofs, 0.0);
    s.u_f = interpolate(&mesh, &dofs.velocity_free, |p| [p[1] * p[1], p[0]]).unwrap();
    s.u_m = interpolate(&mesh, &dofs.velocity_matrix, |p| [p[0] * p[1], p[0] - p[1]]).unwrap();
    s.theta = interpolate_scalar(&mesh, &dofs.temperature, |p| p[0] * (1.0 - p[0]) + p[1] * p[1]).unwrap();
    let d = dissipation(&s, &s, &m, &params, &mesh, &dofs);

    // 2 |D u|^2 with D = [[0, (2y + 1)/2], [(2y + 1)/2, 0]]
    let viscous = rect_integral((0.5, 1.0), |_, y| (2.0 * y + 1.0).powi(2));
    let darcy = rect_integral((0.0, 0.5), |x, y| ((x * y).powi(2) + (x - y).powi(2)) / kappa);
    let brinkman = xi * rect_integral((0.0, 0.5), |x, y| y * y + x * x + 2.0);
    let thermal = sigma * rect_integral((0.0, 1.0), |x, y| (1.0 - 2.0 * x).powi(2) + 4.0 * y * y);
    // Tangential slip u_f . tau = y^2 = 1/4 on the interface, coefficient 1/sqrt(2 kappa).
    let bjsj = (2.0 * kappa).sqrt().recip() * gauss(0.0, 1.0).iter().map(|&(_, w)| w * 0.0625).sum::<f64>();
    for (got, want) in [(d.viscous, viscous), (d.darcy, darcy), (d.brinkman, brinkman), (d.thermal, thermal), (d.bjsj, bjsj)] {
        assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()), "{got} vs {want}");
    }
}

#[test]
fn buoyancy_production_matches_quadrature() {
    let (mesh, dofs) = unit_mesh(2);
    let mut s = State::zeros(&dofs, 0.0);
    s.u_f = interpolate(&mesh, &dofs.velocity_free, |p| [1.0, p[0] * p[1]]).unwrap();
    s.u_m = interpolate(&mesh, &dofs.velocity_matrix, |p| [p[1], 1.0 - p[0]]).unwrap();
    s.theta = interpolate_scalar(&mesh, &dofs.temperature, |p| p[0] * (1.0 - p[0]) + p[1]).unwrap();
    let th = |x: f64, y: f64| x * (1.0 - x) + y;
    let want = rect_integral((0.5, 1.0), |x, y| x * y * th(x, y)) + rect_integral((0.0, 0.5), |x, y| (1.0 - x) * th(x, y));
    let got = buoyancy_production(&s, &mesh, &dofs);
    assert!((got - want).abs() <= 1e-14, "{got} vs {want}");

    s.u_f = interpolate(&mesh, &dofs.velocity_free, |_| [2.0, 0.0]).unwrap();
    s.u_m = interpolate(&mesh, &dofs.velocity_matrix, |_| [-1.0, 0.0]).unwrap();
    assert_eq!(buoyancy_production(&s, &mesh, &dofs), 0.0);
}

#[test]
fn pure_diffusion_slack_is_half_the_thermal_dissipation() {
    let (mesh, dofs) = unit_mesh(4);
    let m = material(&mesh, 1.0);
    let mut params = SchemeParams::new(0.05, 0.0, 2.0, 1.0, 1.0);
    params.buoyancy = false;
    let p = Problem { mesh, dofs, material: m, params };
    let mut s = State::zeros(&p.dofs, 0.0);
    s.theta = interpolate_scalar(&p.mesh, &p.dofs.temperature, |x| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])).unwrap();
    let s = initial_state(s, &p).unwrap();
    let (next, diag) = picard_advance(&s, &p.params, &p.material, &p.mesh, &p.dofs).unwrap();
    let slack = energy_slack(&s, &next, &p.params, &p.material, &p.mesh, &p.dofs).unwrap();
    // Testing backward Euler with theta^{k+1} leaves exactly delta/2 of the thermal dissipation unused.
    let half = 0.5 * p.params.delta * diag.energy.d_thermal;
    assert!((slack - half).abs() <= 1e-10 * half, "slack {slack} vs {half}");
}

#[test]
fn slack_is_undefined_with_sources() {
    let (mesh, dofs) = unit_mesh(2);
    let m = material(&mesh, 1.0);
    let mut params = SchemeParams::new(0.1, 0.1, 1.0, 1.0, 1.0);
    params.sources = Some(Arc::new(Manufactured::new(mesh.geometry(), 1.0, 1.0, 1.0, 1.0, 0.1)));
    let s = State::zeros(&dofs, 0.0);
    assert!(energy_slack(&s, &s, &params, &m, &mesh, &dofs).is_err());
}

#[test]
fn korn_constant_is_positive_and_mesh_stable() {
    let mut lambdas = Vec::new();
    for nx in [2, 4] {
        let (mesh, dofs) = unit_mesh(nx);
        let k = korn_equivalence(&mesh, &dofs).unwrap();
        assert!(k.lambda_min > 0.0);
        assert!((k.c_z - k.lambda_min.powf(-0.5)).abs() <= 1e-15 * k.c_z);
        lambdas.push(k.lambda_min);
    }
    assert!(lambdas[0] / lambdas[1] < 2.0 && lambdas[1] / lambdas[0] < 2.0, "{lambdas:?}");
}

#[test]
fn rigid_rotation_has_no_strain_but_positive_z_norm() {
    let (mesh, dofs) = unit_mesh(4);
    let u_f = interpolate(&mesh, &dofs.velocity_free, |p| [-(p[1] - 0.75), p[0] - 0.5]).unwrap();
    let u_m = vec![0.0; dofs.field_len(Field::VelocityMatrix)];
    let z = z_norm_parts(&u_f, &u_m, &mesh, &dofs);
    assert!(z.strain <= 1e-24);
    // |u . tau|^2 = 1/16 along the unit-length interface.
    assert!((z.slip - 0.0625).abs() <= 1e-14);
    assert_eq!(z.matrix, 0.0);
}

#[test]
fn gronwall_weight_of_zero_state_is_one() {
    let (mesh, dofs) = unit_mesh(4);
    let m = material(&mesh, 1.0);
    let s = State::zeros(&dofs, 0.0);
    assert_eq!(gronwall_weight(&s, &mesh, &dofs).unwrap(), 1.0);
    let u = uniqueness_metrics(&s, &s, &m, &mesh, &dofs).unwrap();
    assert_eq!(u.distance(), 0.0);
    assert_eq!(u.h_a, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn distance_is_quadratic_in_the_perturbation(a in 1e-6f64..1.0, shift in -1.0f64..1.0) {
        let (mesh, dofs) = unit_mesh(4);
        let m = material(&mesh, 1.0);
        let mut base = State::zeros(&dofs, 0.0);
        base.theta = interpolate_scalar(&mesh, &dofs.temperature, |p| shift * p[0] * p[1]).unwrap();
        base.u_f = interpolate(&mesh, &dofs.velocity_free, |p| [shift, p[0]]).unwrap();
        let chi = interpolate_scalar(&mesh, &dofs.temperature, |p| (p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1])).sqrt()).unwrap();
        let perturbed = |amp: f64| {
            let mut s = base.clone();
            s.theta.iter_mut().zip(&chi).for_each(|(t, c)| *t += amp * c);
            uniqueness_metrics(&base, &s, &m, &mesh, &dofs).unwrap().distance()
        };
        let (d1, d2) = (perturbed(a), perturbed(0.5 * a));
        prop_assert!(((d1 / d2).sqrt() - 2.0).abs() <= 1e-9, "{d1} {d2}");
        prop_assert!(uniqueness_metrics(&base, &base, &m, &mesh, &dofs).unwrap().h_a >= 1.0);
    }
}
