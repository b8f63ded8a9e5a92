//! Energy functionals, the discrete energy certificate, the Korn-type
//! equivalence constant and the uniqueness metrics.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::assembly::{apply_boundary_conditions, assemble_projection, edge_points, p2_at, p2_trace, CellQuad};
use crate::error::{param_err, Error, Result};
use crate::fem::{field_norm, DofMap, Field, NodalSpace, NormKind};
use crate::mesh::{DecomposedMesh, Region};
use crate::model::{MaterialModel, SchemeParams};
use crate::state::State;

/// Energy, dissipation and certificate quantities of one step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyReport {
    pub e_sigma: f64,
    pub kinetic_f: f64,
    pub kinetic_m: f64,
    pub thermal: f64,
    pub d_viscous: f64,
    pub d_darcy: f64,
    pub d_bjsj: f64,
    pub d_brinkman: f64,
    pub d_thermal: f64,
    pub production: f64,
    pub inc_f: f64,
    pub inc_m: f64,
    pub inc_theta: f64,
    /// Absent when sources are active.
    pub slack: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyParts {
    pub e_sigma: f64,
    pub kinetic_f: f64,
    pub kinetic_m: f64,
    pub thermal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dissipation {
    /// `2 (nu D(u), D(u))_f`.
    pub viscous: f64,
    /// `(nu / kappa u, u)_m`.
    pub darcy: f64,
    pub bjsj: f64,
    /// `sigma (lambda grad theta, grad theta)`.
    pub thermal: f64,
    /// `xi |grad u_m|^2`.
    pub brinkman: f64,
}

fn l2sq(mesh: &DecomposedMesh, space: &NodalSpace, v: &[f64]) -> f64 {
    let n = field_norm(mesh, space, v, NormKind::L2).expect("sizes follow the dof map");
    n * n
}

pub fn total_energy(state: &State, sigma: f64, varpi: f64, mesh: &DecomposedMesh, dofs: &DofMap) -> EnergyParts {
    let kinetic_f = 0.5 * l2sq(mesh, &dofs.velocity_free, &state.u_f);
    let kinetic_m = 0.5 * varpi * l2sq(mesh, &dofs.velocity_matrix, &state.u_m);
    let thermal = 0.5 * sigma * l2sq(mesh, &dofs.temperature, &state.theta);
    EnergyParts { e_sigma: kinetic_f + kinetic_m + thermal, kinetic_f, kinetic_m, thermal }
}

/// Dissipation of the new state with coefficients lagged at `state_k`.
pub fn dissipation(
    state_k1: &State,
    state_k: &State,
    material: &MaterialModel,
    params: &SchemeParams,
    mesh: &DecomposedMesh,
    dofs: &DofMap,
) -> Dissipation {
    let th = &dofs.temperature;
    let mut d = Dissipation::default();
    for (region, vs, u) in [
        (Region::Free, &dofs.velocity_free, &state_k1.u_f),
        (Region::Matrix, &dofs.velocity_matrix, &state_k1.u_m),
    ] {
        for (cell, &tri) in vs.cells().iter().enumerate() {
            let cq = CellQuad::new(mesh, tri);
            let tcell = th.cell_of(tri).unwrap();
            for q in 0..cq.len() {
                let (tk, _) = p2_at(th, &state_k.theta, tcell, &cq, q);
                let (uv, ug) = p2_at(vs, u, cell, &cq, q);
                let nu = material.nu(tk[0]);
                match region {
                    Region::Free => {
                        let off = 0.5 * (ug[0][1] + ug[1][0]);
                        let dd = ug[0][0] * ug[0][0] + ug[1][1] * ug[1][1] + 2.0 * off * off;
                        d.viscous += cq.w[q] * 2.0 * nu * dd;
                    }
                    Region::Matrix => {
                        let k = material.kappa(cq.x[q]);
                        d.darcy += cq.w[q] * nu / k * (uv[0] * uv[0] + uv[1] * uv[1]);
                        let gg: f64 = ug.iter().flatten().map(|g| g * g).sum();
                        d.brinkman += cq.w[q] * params.xi * gg;
                    }
                }
            }
        }
    }
    for (cell, &tri) in th.cells().iter().enumerate() {
        let cq = CellQuad::new(mesh, tri);
        let region = mesh.triangles()[tri].region;
        for q in 0..cq.len() {
            let (tk, _) = p2_at(th, &state_k.theta, cell, &cq, q);
            let (_, g) = p2_at(th, &state_k1.theta, cell, &cq, q);
            let lam = material.lambda(region, tk[0]);
            d.thermal += cq.w[q] * params.sigma * lam * (g[0][0] * g[0][0] + g[0][1] * g[0][1]);
        }
    }
    let vf = &dofs.velocity_free;
    for seg in dofs.multiplier.segments() {
        let cf = vf.cell_of(seg.free_triangle).unwrap();
        let tm = th.cell_of(seg.matrix_triangle).unwrap();
        let tau = seg.frame.tangent;
        for ep in edge_points(mesh, seg) {
            let u = p2_trace(vf, &state_k1.u_f, cf, &ep.phi_f);
            let theta = p2_trace(th, &state_k.theta, tm, &ep.phi_m)[0];
            let ut = u[0] * tau[0] + u[1] * tau[1];
            d.bjsj += ep.w * material.bjsj(theta, ep.x) * ut * ut;
        }
    }
    d
}

/// `R = (u_f . k, theta)_f + (u_m . k, theta)_m`.
pub fn buoyancy_production(state: &State, mesh: &DecomposedMesh, dofs: &DofMap) -> f64 {
    let k = mesh.geometry().gravity_direction;
    let th = &dofs.temperature;
    let mut r = 0.0;
    for (vs, u) in [(&dofs.velocity_free, &state.u_f), (&dofs.velocity_matrix, &state.u_m)] {
        for (cell, &tri) in vs.cells().iter().enumerate() {
            let cq = CellQuad::new(mesh, tri);
            let tcell = th.cell_of(tri).unwrap();
            for q in 0..cq.len() {
                let (uv, _) = p2_at(vs, u, cell, &cq, q);
                let (t, _) = p2_at(th, &state.theta, tcell, &cq, q);
                r += cq.w[q] * (uv[0] * k[0] + uv[1] * k[1]) * t[0];
            }
        }
    }
    r
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Full report for the step `state_k -> state_k1`.
pub fn energy_report(
    state_k: &State,
    state_k1: &State,
    params: &SchemeParams,
    material: &MaterialModel,
    mesh: &DecomposedMesh,
    dofs: &DofMap,
) -> EnergyReport {
    let e0 = total_energy(state_k, params.sigma, params.varpi, mesh, dofs);
    let e1 = total_energy(state_k1, params.sigma, params.varpi, mesh, dofs);
    let d = dissipation(state_k1, state_k, material, params, mesh, dofs);
    let inc_f = 0.5 * l2sq(mesh, &dofs.velocity_free, &diff(&state_k1.u_f, &state_k.u_f));
    let inc_m = 0.5 * params.varpi * l2sq(mesh, &dofs.velocity_matrix, &diff(&state_k1.u_m, &state_k.u_m));
    let inc_theta = 0.5 * params.sigma * l2sq(mesh, &dofs.temperature, &diff(&state_k1.theta, &state_k.theta));
    let slack = (!params.has_sources()).then(|| {
        let rate = 0.5 * d.viscous + 0.5 * d.darcy + 0.5 * d.bjsj + d.brinkman + 0.5 * d.thermal;
        e0.e_sigma - e1.e_sigma - params.delta * rate - inc_f - inc_m - inc_theta
    });
    EnergyReport {
        e_sigma: e1.e_sigma,
        kinetic_f: e1.kinetic_f,
        kinetic_m: e1.kinetic_m,
        thermal: e1.thermal,
        d_viscous: d.viscous,
        d_darcy: d.darcy,
        d_bjsj: d.bjsj,
        d_brinkman: d.brinkman,
        d_thermal: d.thermal,
        production: buoyancy_production(state_k1, mesh, dofs),
        inc_f,
        inc_m,
        inc_theta,
        slack,
    }
}

/// Slack of the discrete energy inequality
/// `E(k+1) + delta [(nu D,D) + 1/2 darcy + 1/2 bjsj + brinkman + 1/2 thermal] + increments <= E(k)`.
pub fn energy_slack(
    state_k: &State,
    state_k1: &State,
    params: &SchemeParams,
    material: &MaterialModel,
    mesh: &DecomposedMesh,
    dofs: &DofMap,
) -> Result<f64> {
    if params.has_sources() {
        return Err(Error::CertificateUndefined("the energy inequality does not apply with source terms".into()));
    }
    Ok(energy_report(state_k, state_k1, params, material, mesh, dofs).slack.expect("no sources"))
}

/// `max_k [1/2 |theta^k|^2 + sum_{j<k} delta_j (lambda(theta^j) grad theta^{j+1}, grad theta^{j+1}) - 1/2 |theta^0|^2]`
/// over a trajectory of states with their step sizes.
pub fn temperature_decay_check(
    states: &[State],
    material: &MaterialModel,
    mesh: &DecomposedMesh,
    dofs: &DofMap,
) -> f64 {
    let Some(first) = states.first() else { return 0.0 };
    let half0 = 0.5 * l2sq(mesh, &dofs.temperature, &first.theta);
    let mut acc = 0.0;
    let mut worst = 0.0_f64;
    let unit = SchemeParams { sigma: 1.0, xi: 0.0, ..SchemeParams::new(1.0, 0.0, 1.0, 1.0, 0.0) };
    for w in states.windows(2) {
        let delta = w[1].t - w[0].t;
        acc += delta * dissipation(&w[1], &w[0], material, &unit, mesh, dofs).thermal;
        let v = 0.5 * l2sq(mesh, &dofs.temperature, &w[1].theta) + acc - half0;
        worst = worst.max(v);
    }
    worst
}

/// Largest `|<(u_f - u_m) . n, q>_Gamma_i|` over the multiplier basis.
pub fn interface_flux_jump(state: &State, mesh: &DecomposedMesh, dofs: &DofMap) -> f64 {
    let mut acc = vec![0.0; dofs.multiplier.len()];
    let (vf, vm) = (&dofs.velocity_free, &dofs.velocity_matrix);
    for seg in dofs.multiplier.segments() {
        let cf = vf.cell_of(seg.free_triangle).unwrap();
        let cm = vm.cell_of(seg.matrix_triangle).unwrap();
        let n = seg.frame.normal;
        for ep in edge_points(mesh, seg) {
            let uf = p2_trace(vf, &state.u_f, cf, &ep.phi_f);
            let um = p2_trace(vm, &state.u_m, cm, &ep.phi_m);
            let jump = (uf[0] - um[0]) * n[0] + (uf[1] - um[1]) * n[1];
            for m in 0..2 {
                acc[seg.nodes[m]] += ep.w * ep.psi[m] * jump;
            }
        }
    }
    acc.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Largest `|(q, div u)|` over pressure basis functions of both regions.
pub fn divergence_residual(state: &State, mesh: &DecomposedMesh, dofs: &DofMap) -> f64 {
    let mut worst = 0.0_f64;
    for (vs, ps, u) in [
        (&dofs.velocity_free, &dofs.pressure_free, &state.u_f),
        (&dofs.velocity_matrix, &dofs.pressure_matrix, &state.u_m),
    ] {
        let mut acc = vec![0.0; ps.len()];
        for (cell, &tri) in vs.cells().iter().enumerate() {
            let cq = CellQuad::new(mesh, tri);
            let pc = ps.cell_of(tri).unwrap();
            let pn = ps.cell_nodes(pc);
            for q in 0..cq.len() {
                let (_, g) = p2_at(vs, u, cell, &cq, q);
                let div = g[0][0] + g[1][1];
                for k in 0..3 {
                    acc[pn[k]] += cq.w[q] * cq.psi(q)[k] * div;
                }
            }
        }
        worst = acc.iter().fold(worst, |m, v| m.max(v.abs()));
    }
    worst
}

/// Result of the Z-norm equivalence eigenproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KornResult {
    pub lambda_min: f64,
    pub c_z: f64,
    pub dimension: usize,
}

/// Velocity-space quadratic forms used by the Korn eigenproblem, over the
/// concatenated `(u_f, u_m)` coefficient layout.
fn korn_forms(mesh: &DecomposedMesh, dofs: &DofMap) -> (Mat<f64>, Mat<f64>, usize) {
    let nf = dofs.field_len(Field::VelocityFree);
    let nm = dofs.field_len(Field::VelocityMatrix);
    let n = nf + nm;
    let mut z = Mat::<f64>::zeros(n, n);
    let mut h = Mat::<f64>::zeros(n, n);
    for (region, vs, off) in [(Region::Free, &dofs.velocity_free, 0), (Region::Matrix, &dofs.velocity_matrix, nf)] {
        for (cell, &tri) in vs.cells().iter().enumerate() {
            let cq = CellQuad::new(mesh, tri);
            let nodes = vs.cell_nodes(cell);
            for q in 0..cq.len() {
                let w = cq.w[q];
                let phi = cq.phi(q);
                let d = &cq.dphi[q];
                for i in 0..6 {
                    for j in 0..6 {
                        let mm = w * phi[i] * phi[j];
                        let gg = w * (d[i][0] * d[j][0] + d[i][1] * d[j][1]);
                        for c in 0..2 {
                            let r = off + 2 * nodes[i] + c;
                            for e in 0..2 {
                                let s = off + 2 * nodes[j] + e;
                                match region {
                                    Region::Free => {
                                        // (D(phi_j e_e), D(phi_i e_c)) = 1/2 [delta_ce grad.grad + d_c phi_j d_e phi_i]
                                        let mut dd = 0.5 * w * d[j][c] * d[i][e];
                                        if c == e {
                                            dd += 0.5 * gg;
                                            h[(r, s)] += mm + gg;
                                        }
                                        z[(r, s)] += dd;
                                    }
                                    Region::Matrix => {
                                        if c == e {
                                            z[(r, s)] += mm;
                                            h[(r, s)] += mm;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let vf = &dofs.velocity_free;
    for seg in dofs.multiplier.segments() {
        let cf = vf.cell_of(seg.free_triangle).unwrap();
        let nodes = vf.cell_nodes(cf);
        let tau = seg.frame.tangent;
        for ep in edge_points(mesh, seg) {
            for i in 0..6 {
                for j in 0..6 {
                    for c in 0..2 {
                        for e in 0..2 {
                            z[(2 * nodes[i] + c, 2 * nodes[j] + e)] +=
                                ep.w * ep.phi_f[i] * ep.phi_f[j] * tau[c] * tau[e];
                        }
                    }
                }
            }
        }
    }
    (z, h, nf)
}

/// Parts of the Z-norm: `|D(u_f)|^2`, `|u_f . tau|^2_Gamma_i` and `|u_m|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZNormParts {
    pub strain: f64,
    pub slip: f64,
    pub matrix: f64,
}

impl ZNormParts {
    pub fn total(&self) -> f64 {
        self.strain + self.slip + self.matrix
    }
}

pub fn z_norm_parts(u_f: &[f64], u_m: &[f64], mesh: &DecomposedMesh, dofs: &DofMap) -> ZNormParts {
    let vf = &dofs.velocity_free;
    let matrix = l2sq(mesh, &dofs.velocity_matrix, u_m);
    let mut strain = 0.0;
    for (cell, &tri) in vf.cells().iter().enumerate() {
        let cq = CellQuad::new(mesh, tri);
        for q in 0..cq.len() {
            let (_, g) = p2_at(vf, u_f, cell, &cq, q);
            let off = 0.5 * (g[0][1] + g[1][0]);
            strain += cq.w[q] * (g[0][0] * g[0][0] + g[1][1] * g[1][1] + 2.0 * off * off);
        }
    }
    let mut slip = 0.0;
    for seg in dofs.multiplier.segments() {
        let cf = vf.cell_of(seg.free_triangle).unwrap();
        let tau = seg.frame.tangent;
        for ep in edge_points(mesh, seg) {
            let u = p2_trace(vf, u_f, cf, &ep.phi_f);
            let ut = u[0] * tau[0] + u[1] * tau[1];
            slip += ep.w * ut * ut;
        }
    }
    ZNormParts { strain, slip, matrix }
}

/// Z-norm quadratic form `|D(u_f)|^2 + |u_f . tau|^2_Gamma_i + |u_m|^2`.
pub fn z_norm_squared(u_f: &[f64], u_m: &[f64], mesh: &DecomposedMesh, dofs: &DofMap) -> f64 {
    z_norm_parts(u_f, u_m, mesh, dofs).total()
}

/// Smallest eigenvalue of the pencil (Z-form, H1 x L2 form) on the discrete
/// velocity space satisfying the divergence and interface constraints.
pub fn korn_equivalence(mesh: &DecomposedMesh, dofs: &DofMap) -> Result<KornResult> {
    let (z, h, nf) = korn_forms(mesh, dofs);
    // Free velocity coefficients in (u_f, u_m) layout.
    let mut vel = Vec::new();
    for (field, off) in [(Field::VelocityFree, 0), (Field::VelocityMatrix, nf)] {
        let fd = dofs.field(field);
        vel.extend((0..fd.free.len()).filter(|&c| fd.free[c].is_some()).map(|c| off + c));
    }
    let nu = vel.len();
    // Constraint rows from the reduced projection system.
    let zeros_f = vec![0.0; dofs.field_len(Field::VelocityFree)];
    let zeros_m = vec![0.0; dofs.field_len(Field::VelocityMatrix)];
    let proj = apply_boundary_conditions(&assemble_projection(mesh, dofs, &zeros_f, &zeros_m)?, mesh, dofs)?;
    let layout = &proj.layout;
    let mut vel_pos = std::collections::HashMap::new();
    let mut cons_rows = Vec::new();
    for (row, &(f, c)) in layout.rows().iter().enumerate() {
        match f {
            Field::VelocityFree => {
                vel_pos.insert(row, c);
            }
            Field::VelocityMatrix => {
                vel_pos.insert(row, nf + c);
            }
            _ => cons_rows.push(row),
        }
    }
    let index_of: std::collections::HashMap<usize, usize> = vel.iter().enumerate().map(|(k, &g)| (g, k)).collect();
    let nc = cons_rows.len();
    let mut bt = Mat::<f64>::zeros(nu, nc);
    for (k, &row) in cons_rows.iter().enumerate() {
        for (col, v) in proj.matrix.row(row) {
            if let Some(g) = vel_pos.get(&col) {
                bt[(index_of[g], k)] = v;
            }
        }
    }
    let qr = bt.col_piv_qr();
    let r = qr.R();
    let scale = (0..nc.min(nu)).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let rank = (0..nc.min(nu)).filter(|&i| r[(i, i)].abs() > 1e-10 * scale).count();
    let q = qr.compute_Q();
    let dim = nu - rank;
    if dim == 0 {
        return param_err("constrained velocity space is empty");
    }
    let kernel = Mat::<f64>::from_fn(nu, dim, |i, j| q[(i, rank + j)]);
    let zr = Mat::<f64>::from_fn(nu, nu, |i, j| z[(vel[i], vel[j])]);
    let hr = Mat::<f64>::from_fn(nu, nu, |i, j| h[(vel[i], vel[j])]);
    let zk = kernel.transpose() * &zr * &kernel;
    let hk = kernel.transpose() * &hr * &kernel;
    let hk = symmetrize(&hk);
    let eig_h = hk
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigen decomposition failed: {e:?}")))?;
    let s = eig_h.S().column_vector();
    let u = eig_h.U();
    if (0..dim).any(|i| !(s[i] > 0.0)) {
        return Err(Error::Numerical("H1 x L2 form is not positive definite on the constrained space".into()));
    }
    let inv_sqrt = Mat::<f64>::from_fn(dim, dim, |i, j| u[(i, j)] / s[j].sqrt());
    let c = inv_sqrt.transpose() * symmetrize(&zk) * &inv_sqrt;
    let vals = symmetrize(&c)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigen decomposition failed: {e:?}")))?;
    let lambda_min = vals[0];
    if !(lambda_min > 0.0) {
        return Err(Error::Numerical(format!("Z-norm pencil has nonpositive eigenvalue {lambda_min}")));
    }
    Ok(KornResult { lambda_min, c_z: lambda_min.powf(-0.5), dimension: dim })
}

fn symmetrize(a: &Mat<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

/// Difference norms of two states and the Gronwall weight of the first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniquenessMetrics {
    pub du_f: f64,
    pub du_m: f64,
    pub dtheta: f64,
    pub z_norm: f64,
    pub h_a: f64,
}

impl UniquenessMetrics {
    /// `d = |du_f|^2 + varpi |du_m|^2 + |dtheta|^2`.
    pub fn distance(&self) -> f64 {
        self.du_f + self.du_m + self.dtheta
    }
}

/// `h = |u_f|^4_{W1,6} + |u_m|^4_{L6} + |grad theta|^8_{L4} + 1`.
pub fn gronwall_weight(state: &State, mesh: &DecomposedMesh, dofs: &DofMap) -> Result<f64> {
    let uf6 = field_norm(mesh, &dofs.velocity_free, &state.u_f, NormKind::L6)?;
    let guf6 = field_norm(mesh, &dofs.velocity_free, &state.u_f, NormKind::W16Semi)?;
    let w16 = (uf6.powi(6) + guf6.powi(6)).powf(1.0 / 6.0);
    let um6 = field_norm(mesh, &dofs.velocity_matrix, &state.u_m, NormKind::L6)?;
    let gt4 = grad_l4(mesh, &dofs.temperature, &state.theta);
    Ok(w16.powi(4) + um6.powi(4) + gt4.powi(8) + 1.0)
}

fn grad_l4(mesh: &DecomposedMesh, space: &NodalSpace, theta: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (cell, &tri) in space.cells().iter().enumerate() {
        let cq = CellQuad::new(mesh, tri);
        for q in 0..cq.len() {
            let (_, g) = p2_at(space, theta, cell, &cq, q);
            let s = g[0][0] * g[0][0] + g[0][1] * g[0][1];
            acc += cq.w[q] * s * s;
        }
    }
    acc.powf(0.25)
}

pub fn uniqueness_metrics(
    a: &State,
    b: &State,
    material: &MaterialModel,
    mesh: &DecomposedMesh,
    dofs: &DofMap,
) -> Result<UniquenessMetrics> {
    a.validate_sizes(dofs)?;
    b.validate_sizes(dofs)?;
    let du_f = diff(&a.u_f, &b.u_f);
    let du_m = diff(&a.u_m, &b.u_m);
    Ok(UniquenessMetrics {
        du_f: l2sq(mesh, &dofs.velocity_free, &du_f),
        du_m: material.varpi() * l2sq(mesh, &dofs.velocity_matrix, &du_m),
        dtheta: l2sq(mesh, &dofs.temperature, &diff(&a.theta, &b.theta)),
        z_norm: z_norm_squared(&du_f, &du_m, mesh, dofs).max(0.0).sqrt(),
        h_a: gronwall_weight(a, mesh, dofs)?,
    })
}

/// Velocity-block matrix over the free `(u_f, u_m)` coefficients of the
/// dissipation form `2(nu D,D)_f + (nu/kappa u,u)_m + xi |grad u_m|^2 + BJSJ`
/// with `nu`, `lambda` evaluated at `theta`; used for positivity checks.
pub fn dissipation_matrix(
    theta: &[f64],
    material: &MaterialModel,
    xi: f64,
    mesh: &DecomposedMesh,
    dofs: &DofMap,
) -> crate::linalg::CsrMatrix {
    use crate::assembly::{flow_operator, MomentumTerms};
    let terms = MomentumTerms {
        mass_f: 0.0,
        mass_m: 0.0,
        viscous: true,
        darcy: true,
        brinkman: xi,
        bjsj: true,
        convection: false,
    };
    let (m, layout) = flow_operator(mesh, dofs, Some(material), terms, theta, None);
    let keep: Vec<usize> = layout
        .rows()
        .iter()
        .enumerate()
        .filter(|(_, &(f, c))| {
            matches!(f, Field::VelocityFree | Field::VelocityMatrix) && !dofs.is_constrained(f, c)
        })
        .map(|(i, _)| i)
        .collect();
    m.submatrix(&keep, &keep)
}
