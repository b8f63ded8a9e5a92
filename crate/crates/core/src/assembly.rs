//! Finite-element assembly of the momentum/mass and temperature systems of
//! one Picard iterate, and of the auxiliary projection and eigen pencils.

use crate::error::{param_err, Result};
use crate::fem::{edge_rule, tables, AffineMap, DofMap, Field, InterfaceSegment, NodalSpace};
use crate::fem::shape::p2_values;
use crate::linalg::{norm2, CsrMatrix, TripletBuilder};
pub use crate::linalg::{BlockLayout, SparseSystem};
use crate::mesh::{reference_coords, DecomposedMesh, Point, Region};
use crate::model::{MaterialModel, SchemeParams};
use crate::state::State;

/// Basis data of one triangle at the shared degree-6 quadrature points.
pub(crate) struct CellQuad {
    /// Quadrature weights including the Jacobian.
    pub w: Vec<f64>,
    pub x: Vec<Point>,
    /// Physical P2 gradients per point.
    pub dphi: Vec<[[f64; 2]; 6]>,
}

impl CellQuad {
    pub fn new(mesh: &DecomposedMesh, tri: usize) -> Self {
        let t = tables();
        let map = AffineMap::new(&mesh.triangle_coords(tri));
        let det = map.det.abs();
        let w = t.rule.weights.iter().map(|w| w * det).collect();
        let x = t.rule.points.iter().map(|&p| map.map(p)).collect();
        let dphi = t
            .p2_grad
            .iter()
            .map(|g| {
                let mut out = [[0.0; 2]; 6];
                for k in 0..6 {
                    out[k] = map.grad(g[k]);
                }
                out
            })
            .collect();
        CellQuad { w, x, dphi }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    #[inline]
    pub fn phi(&self, q: usize) -> &[f64; 6] {
        &tables().p2[q]
    }

    #[inline]
    pub fn psi(&self, q: usize) -> &[f64; 3] {
        &tables().p1[q]
    }
}

/// Value and gradient of a P2 field (scalar or vector) at one quadrature
/// point of a cell.
#[inline]
pub(crate) fn p2_at(space: &NodalSpace, coeffs: &[f64], cell: usize, cq: &CellQuad, q: usize) -> ([f64; 2], [[f64; 2]; 2]) {
    let nodes = space.cell_nodes(cell);
    let comps = space.components();
    let phi = cq.phi(q);
    let dphi = &cq.dphi[q];
    let mut v = [0.0; 2];
    let mut g = [[0.0; 2]; 2];
    for k in 0..6 {
        for c in 0..comps {
            let a = coeffs[comps * nodes[k] + c];
            v[c] += a * phi[k];
            g[c][0] += a * dphi[k][0];
            g[c][1] += a * dphi[k][1];
        }
    }
    (v, g)
}

#[inline]
pub(crate) fn p1_at(space: &NodalSpace, coeffs: &[f64], cell: usize, cq: &CellQuad, q: usize) -> f64 {
    let nodes = space.cell_nodes(cell);
    let psi = cq.psi(q);
    (0..3).map(|k| coeffs[nodes[k]] * psi[k]).sum()
}

/// One quadrature point on an interface segment with the traces of the
/// adjacent cells' bases.
pub(crate) struct EdgePoint {
    pub x: Point,
    /// Weight including the segment length.
    pub w: f64,
    pub phi_f: [f64; 6],
    pub phi_m: [f64; 6],
    /// P1 multiplier basis of the segment's two nodes.
    pub psi: [f64; 2],
}

pub(crate) fn edge_points(mesh: &DecomposedMesh, seg: &InterfaceSegment) -> Vec<EdgePoint> {
    let r = edge_rule();
    let [a, b] = seg.endpoints;
    let tf = mesh.triangle_coords(seg.free_triangle);
    let tm = mesh.triangle_coords(seg.matrix_triangle);
    r.points
        .iter()
        .zip(&r.weights)
        .map(|(&s, &w)| {
            let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            EdgePoint {
                x,
                w: w * seg.frame.length,
                phi_f: p2_values(clamp_ref(reference_coords(&tf, x))),
                phi_m: p2_values(clamp_ref(reference_coords(&tm, x))),
                psi: [1.0 - s, s],
            }
        })
        .collect()
}

/// Rounding can push an edge point marginally outside the reference
/// triangle; project it back.
fn clamp_ref([x, y]: Point) -> Point {
    let x = x.max(0.0);
    let y = y.max(0.0);
    let s = x + y;
    if s > 1.0 {
        [x / s, y / s]
    } else {
        [x, y]
    }
}

pub(crate) fn p2_trace(space: &NodalSpace, coeffs: &[f64], cell: usize, phi: &[f64; 6]) -> [f64; 2] {
    let nodes = space.cell_nodes(cell);
    let comps = space.components();
    let mut v = [0.0; 2];
    for k in 0..6 {
        for c in 0..comps {
            v[c] += coeffs[comps * nodes[k] + c] * phi[k];
        }
    }
    v
}

fn check_len(name: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return param_err(format!("{name} has length {}, expected {n}", v.len()));
    }
    Ok(())
}

/// Skew-symmetrized convection form
/// `c(a; v, w) = 1/2 (a.grad v, w) - 1/2 (a.grad w, v) + 1/2 <(v.w)(a.n)>_Gamma_i`
/// over the free region; all arguments are free-velocity coefficient vectors.
pub fn convection_form(mesh: &DecomposedMesh, dofs: &DofMap, a: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
    let sp = &dofs.velocity_free;
    for (name, x) in [("a", a), ("v", v), ("w", w)] {
        check_len(name, x, sp.len())?;
    }
    let mut total = 0.0;
    for (cell, &tri) in sp.cells().iter().enumerate() {
        let cq = CellQuad::new(mesh, tri);
        for q in 0..cq.len() {
            let (av, _) = p2_at(sp, a, cell, &cq, q);
            let (vv, vg) = p2_at(sp, v, cell, &cq, q);
            let (wv, wg) = p2_at(sp, w, cell, &cq, q);
            let mut s = 0.0;
            for c in 0..2 {
                let adv = av[0] * vg[c][0] + av[1] * vg[c][1];
                let adw = av[0] * wg[c][0] + av[1] * wg[c][1];
                s += 0.5 * (adv * wv[c] - adw * vv[c]);
            }
            total += cq.w[q] * s;
        }
    }
    for seg in dofs.multiplier.segments() {
        let cell = sp.cell_of(seg.free_triangle).expect("free triangle in velocity space");
        let n = seg.frame.normal;
        for ep in edge_points(mesh, seg) {
            let av = p2_trace(sp, a, cell, &ep.phi_f);
            let vv = p2_trace(sp, v, cell, &ep.phi_f);
            let wv = p2_trace(sp, w, cell, &ep.phi_f);
            let an = av[0] * n[0] + av[1] * n[1];
            total += ep.w * 0.5 * (vv[0] * wv[0] + vv[1] * wv[1]) * an;
        }
    }
    Ok(total)
}

/// Which parts of the momentum operator to include. The full step operator
/// uses everything; diagnostics and the projection use subsets.
#[derive(Debug, Clone, Copy)]
pub(crate) struct MomentumTerms {
    pub mass_f: f64,
    pub mass_m: f64,
    pub viscous: bool,
    pub darcy: bool,
    pub brinkman: f64,
    pub bjsj: bool,
    pub convection: bool,
}

struct MomentumInputs<'a> {
    theta_coef: &'a [f64],
    u_lag: Option<&'a [f64]>,
}

fn assemble_flow_matrix(
    mesh: &DecomposedMesh,
    dofs: &DofMap,
    material: Option<&MaterialModel>,
    terms: MomentumTerms,
    inputs: &MomentumInputs<'_>,
) -> (CsrMatrix, BlockLayout) {
    let layout = BlockLayout::full(dofs, &Field::FLOW);
    let off = |f: Field| layout.full_offset(f).unwrap().start;
    let (ouf, opf, oum, opm, omu) = (
        off(Field::VelocityFree),
        off(Field::PressureFree),
        off(Field::VelocityMatrix),
        off(Field::PressureMatrix),
        off(Field::Multiplier),
    );
    let n = layout.len();
    let mut tb = TripletBuilder::with_capacity(n, n, 260 * mesh.num_triangles());
    let th = &dofs.temperature;
    let nu_at = |theta: f64| material.map_or(1.0, |m| m.nu(theta));

    for (region, vs, ps, ou, op) in [
        (Region::Free, &dofs.velocity_free, &dofs.pressure_free, ouf, opf),
        (Region::Matrix, &dofs.velocity_matrix, &dofs.pressure_matrix, oum, opm),
    ] {
        for (cell, &tri) in vs.cells().iter().enumerate() {
            let cq = CellQuad::new(mesh, tri);
            let pcell = ps.cell_of(tri).expect("pressure and velocity share cells");
            let tcell = th.cell_of(tri).expect("temperature covers all cells");
            let vn = vs.cell_nodes(cell);
            let pn = ps.cell_nodes(pcell);
            let mut local = [[0.0; 12]; 12];
            let mut div = [[0.0; 12]; 3];
            for q in 0..cq.len() {
                let w = cq.w[q];
                let phi = cq.phi(q);
                let dphi = &cq.dphi[q];
                let psi = cq.psi(q);
                let (theta, _) = p2_at(th, inputs.theta_coef, tcell, &cq, q);
                let nu = nu_at(theta[0]);
                let (mass, lap, nu_visc) = match region {
                    Region::Free => (terms.mass_f, 0.0, if terms.viscous { nu } else { 0.0 }),
                    Region::Matrix => {
                        let darcy = if terms.darcy { nu / material.map_or(1.0, |m| m.kappa(cq.x[q])) } else { 0.0 };
                        (terms.mass_m + darcy, terms.brinkman, 0.0)
                    }
                };
                let a = match (region, inputs.u_lag) {
                    (Region::Free, Some(u)) if terms.convection => Some(p2_at(vs, u, cell, &cq, q).0),
                    _ => None,
                };
                for i in 0..6 {
                    for j in 0..6 {
                        let mm = w * mass * phi[i] * phi[j];
                        let gg = dphi[i][0] * dphi[j][0] + dphi[i][1] * dphi[j][1];
                        let diag = mm + w * (lap + nu_visc) * gg;
                        let conv = a.map_or(0.0, |a| {
                            let adj = a[0] * dphi[j][0] + a[1] * dphi[j][1];
                            let adi = a[0] * dphi[i][0] + a[1] * dphi[i][1];
                            0.5 * w * (adj * phi[i] - adi * phi[j])
                        });
                        for c in 0..2 {
                            local[2 * i + c][2 * j + c] += diag + conv;
                            if nu_visc != 0.0 {
                                for d in 0..2 {
                                    local[2 * i + c][2 * j + d] += w * nu_visc * dphi[j][c] * dphi[i][d];
                                }
                            }
                        }
                    }
                }
                for k in 0..3 {
                    for j in 0..6 {
                        for d in 0..2 {
                            div[k][2 * j + d] -= w * psi[k] * dphi[j][d];
                        }
                    }
                }
            }
            for r in 0..12 {
                let gr = ou + 2 * vn[r / 2] + r % 2;
                for c in 0..12 {
                    tb.add(gr, ou + 2 * vn[c / 2] + c % 2, local[r][c]);
                }
            }
            for k in 0..3 {
                let gp = op + pn[k];
                for c in 0..12 {
                    let gu = ou + 2 * vn[c / 2] + c % 2;
                    tb.add(gp, gu, div[k][c]);
                    tb.add(gu, gp, div[k][c]);
                }
            }
        }
    }

    // Interface terms.
    let vf = &dofs.velocity_free;
    let vm = &dofs.velocity_matrix;
    for seg in dofs.multiplier.segments() {
        let cf = vf.cell_of(seg.free_triangle).unwrap();
        let cm = vm.cell_of(seg.matrix_triangle).unwrap();
        let tcell = th.cell_of(seg.matrix_triangle).unwrap();
        let nf = vf.cell_nodes(cf);
        let nm = vm.cell_nodes(cm);
        let n = seg.frame.normal;
        let tau = seg.frame.tangent;
        let mut ff = [[0.0; 12]; 12];
        let mut cf_mu = [[0.0; 12]; 2];
        let mut cm_mu = [[0.0; 12]; 2];
        for ep in edge_points(mesh, seg) {
            let theta = p2_trace(th, inputs.theta_coef, tcell, &ep.phi_m)[0];
            let gamma = if terms.bjsj { material.map_or(0.0, |m| m.bjsj(theta, ep.x)) } else { 0.0 };
            let a = match inputs.u_lag {
                Some(u) if terms.convection => Some(p2_trace(vf, u, cf, &ep.phi_f)),
                _ => None,
            };
            let an = a.map_or(0.0, |a| a[0] * n[0] + a[1] * n[1]);
            for i in 0..6 {
                for j in 0..6 {
                    let pp = ep.w * ep.phi_f[i] * ep.phi_f[j];
                    for c in 0..2 {
                        for d in 0..2 {
                            let mut v = gamma * tau[c] * tau[d] * pp;
                            if let Some(a) = a {
                                if c == d {
                                    v += 0.5 * an * pp;
                                }
                                // Linearized Lions dynamic pressure.
                                v -= 0.5 * a[d] * n[c] * pp;
                            }
                            ff[2 * i + c][2 * j + d] += v;
                        }
                    }
                }
            }
            for m in 0..2 {
                for j in 0..6 {
                    for d in 0..2 {
                        cf_mu[m][2 * j + d] += ep.w * ep.psi[m] * ep.phi_f[j] * n[d];
                        cm_mu[m][2 * j + d] -= ep.w * ep.psi[m] * ep.phi_m[j] * n[d];
                    }
                }
            }
        }
        for r in 0..12 {
            let gr = ouf + 2 * nf[r / 2] + r % 2;
            for c in 0..12 {
                if ff[r][c] != 0.0 || terms.convection || terms.bjsj {
                    tb.add(gr, ouf + 2 * nf[c / 2] + c % 2, ff[r][c]);
                }
            }
        }
        for m in 0..2 {
            let gm = omu + seg.nodes[m];
            for c in 0..12 {
                let gf = ouf + 2 * nf[c / 2] + c % 2;
                let gmv = oum + 2 * nm[c / 2] + c % 2;
                tb.add(gm, gf, cf_mu[m][c]);
                tb.add(gf, gm, cf_mu[m][c]);
                tb.add(gm, gmv, cm_mu[m][c]);
                tb.add(gmv, gm, cm_mu[m][c]);
            }
        }
    }
    (tb.build(), layout)
}

/// Right-hand side `(m_f u_f^k + f_f, v_f) + (m_m u_m^k + f_m, v_m) + (theta k, v)`.
fn assemble_flow_rhs(
    mesh: &DecomposedMesh,
    dofs: &DofMap,
    layout: &BlockLayout,
    state_k: &State,
    theta_guess: &[f64],
    params: &SchemeParams,
    mass_f: f64,
    mass_m: f64,
) -> Vec<f64> {
    let mut rhs = vec![0.0; layout.len()];
    let k = mesh.geometry().gravity_direction;
    let th = &dofs.temperature;
    let t_new = state_k.t + params.delta;
    for (region, vs, field, uk) in [
        (Region::Free, &dofs.velocity_free, Field::VelocityFree, &state_k.u_f),
        (Region::Matrix, &dofs.velocity_matrix, Field::VelocityMatrix, &state_k.u_m),
    ] {
        let o = layout.full_offset(field).unwrap().start;
        let mass = if region == Region::Free { mass_f } else { mass_m };
        for (cell, &tri) in vs.cells().iter().enumerate() {
            let cq = CellQuad::new(mesh, tri);
            let tcell = th.cell_of(tri).unwrap();
            let vn = vs.cell_nodes(cell);
            for q in 0..cq.len() {
                let (u, _) = p2_at(vs, uk, cell, &cq, q);
                let (theta, _) = p2_at(th, theta_guess, tcell, &cq, q);
                let mut f = [mass * u[0] + theta[0] * k[0], mass * u[1] + theta[0] * k[1]];
                if let Some(src) = params.sources.as_ref() {
                    let s = match region {
                        Region::Free => src.momentum_free(cq.x[q], t_new),
                        Region::Matrix => src.momentum_matrix(cq.x[q], t_new),
                    };
                    f[0] += s[0];
                    f[1] += s[1];
                }
                let phi = cq.phi(q);
                for i in 0..6 {
                    for c in 0..2 {
                        rhs[o + 2 * vn[i] + c] += cq.w[q] * f[c] * phi[i];
                    }
                }
            }
        }
    }
    rhs
}

fn step_terms(params: &SchemeParams) -> MomentumTerms {
    MomentumTerms {
        mass_f: 1.0 / params.delta,
        mass_m: params.varpi / params.delta,
        viscous: true,
        darcy: true,
        brinkman: params.xi,
        bjsj: true,
        convection: true,
    }
}

/// Momentum/mass/interface system of one Picard iterate over the full
/// coefficient layout of `(u_f, P_f, u_m, P_m, mu)`. Viscosity and
/// permeability terms use the lagged temperature `state_k.theta`; buoyancy
/// uses `theta_guess` and convection is linearized about `u_lag`.
pub fn assemble_momentum(
    state_k: &State,
    theta_guess: &[f64],
    u_lag: &[f64],
    params: &SchemeParams,
    material: &MaterialModel,
    mesh: &DecomposedMesh,
    dofs: &DofMap,
) -> Result<SparseSystem> {
    state_k.validate_sizes(dofs)?;
    check_len("theta_guess", theta_guess, dofs.field_len(Field::Temperature))?;
    check_len("u_lag", u_lag, dofs.field_len(Field::VelocityFree))?;
    let terms = step_terms(params);
    let inputs = MomentumInputs { theta_coef: &state_k.theta, u_lag: Some(u_lag) };
    let (matrix, layout) = assemble_flow_matrix(mesh, dofs, Some(material), terms, &inputs);
    let rhs = assemble_flow_rhs(mesh, dofs, &layout, state_k, theta_guess, params, terms.mass_f, terms.mass_m);
    SparseSystem::new(matrix, rhs, layout)
}

/// Temperature system `(M/delta + K_lambda + A(u)) theta = M theta^k / delta + g`
/// with the antisymmetrized advection `A`.
pub fn assemble_temperature(
    state_k: &State,
    u_f: &[f64],
    u_m: &[f64],
    params: &SchemeParams,
    material: &MaterialModel,
    mesh: &DecomposedMesh,
    dofs: &DofMap,
) -> Result<SparseSystem> {
    state_k.validate_sizes(dofs)?;
    check_len("u_f", u_f, dofs.field_len(Field::VelocityFree))?;
    check_len("u_m", u_m, dofs.field_len(Field::VelocityMatrix))?;
    let layout = BlockLayout::full(dofs, &[Field::Temperature]);
    let n = layout.len();
    let th = &dofs.temperature;
    let mut tb = TripletBuilder::with_capacity(n, n, 36 * mesh.num_triangles());
    let mut rhs = vec![0.0; n];
    let inv_dt = 1.0 / params.delta;
    let t_new = state_k.t + params.delta;
    for (cell, &tri) in th.cells().iter().enumerate() {
        let region = mesh.triangles()[tri].region;
        let (vs, u) = match region {
            Region::Free => (&dofs.velocity_free, u_f),
            Region::Matrix => (&dofs.velocity_matrix, u_m),
        };
        let vcell = vs.cell_of(tri).unwrap();
        let cq = CellQuad::new(mesh, tri);
        let tn = th.cell_nodes(cell);
        let mut local = [[0.0; 6]; 6];
        let mut lr = [0.0; 6];
        for q in 0..cq.len() {
            let w = cq.w[q];
            let phi = cq.phi(q);
            let dphi = &cq.dphi[q];
            let (theta_k, _) = p2_at(th, &state_k.theta, cell, &cq, q);
            let (uv, _) = p2_at(vs, u, vcell, &cq, q);
            let lam = material.lambda(region, theta_k[0]);
            let mut f = inv_dt * theta_k[0];
            if let Some(src) = params.sources.as_ref() {
                f += src.heat(cq.x[q], t_new);
            }
            for i in 0..6 {
                lr[i] += w * f * phi[i];
                let udi = uv[0] * dphi[i][0] + uv[1] * dphi[i][1];
                for j in 0..6 {
                    let udj = uv[0] * dphi[j][0] + uv[1] * dphi[j][1];
                    let gg = dphi[i][0] * dphi[j][0] + dphi[i][1] * dphi[j][1];
                    local[i][j] += w * (inv_dt * phi[i] * phi[j] + lam * gg + 0.5 * (udj * phi[i] - udi * phi[j]));
                }
            }
        }
        for i in 0..6 {
            rhs[tn[i]] += lr[i];
            for j in 0..6 {
                tb.add(tn[i], tn[j], local[i][j]);
            }
        }
    }
    if let Some(load) = params.sources.as_ref().and_then(|s| s.heat_load(t_new)) {
        check_len("heat load", &load, n)?;
        for (r, l) in rhs.iter_mut().zip(&load) {
            *r += l;
        }
    }
    SparseSystem::new(tb.build(), rhs, layout)
}

/// Eliminates constrained coefficients (homogeneous values). Idempotent.
pub fn apply_boundary_conditions(system: &SparseSystem, _mesh: &DecomposedMesh, dofs: &DofMap) -> Result<SparseSystem> {
    system.eliminate(dofs, None)
}

/// Euclidean norms of the step residuals of `state_k1` with convection,
/// Lions and buoyancy evaluated at `state_k1` itself.
pub fn weak_residual(
    state_k: &State,
    state_k1: &State,
    params: &SchemeParams,
    material: &MaterialModel,
    mesh: &DecomposedMesh,
    dofs: &DofMap,
) -> Result<(f64, f64)> {
    let mom = if params.buoyancy {
        let sys = apply_boundary_conditions(
            &assemble_momentum(state_k, &state_k1.theta, &state_k1.u_f, params, material, mesh, dofs)?,
            mesh,
            dofs,
        )?;
        residual_norm(&sys, &state_k1.gather(&Field::FLOW))
    } else {
        0.0
    };
    let temp = apply_boundary_conditions(
        &assemble_temperature(state_k, &state_k1.u_f, &state_k1.u_m, params, material, mesh, dofs)?,
        mesh,
        dofs,
    )?;
    let temp = residual_norm(&temp, &state_k1.theta);
    Ok((mom, temp))
}

fn residual_norm(sys: &SparseSystem, full: &[f64]) -> f64 {
    let x = sys.restrict(full);
    let ax = sys.matrix.mul_vec(&x);
    let r: Vec<f64> = ax.iter().zip(&sys.rhs).map(|(a, b)| a - b).collect();
    norm2(&r)
}

/// `L2` projection of `(u_f, u_m)` onto the discrete constraint manifold:
/// mass matrix on both regions with the divergence and interface
/// constraints.
pub fn assemble_projection(mesh: &DecomposedMesh, dofs: &DofMap, u_f: &[f64], u_m: &[f64]) -> Result<SparseSystem> {
    check_len("u_f", u_f, dofs.field_len(Field::VelocityFree))?;
    check_len("u_m", u_m, dofs.field_len(Field::VelocityMatrix))?;
    let terms = MomentumTerms {
        mass_f: 1.0,
        mass_m: 1.0,
        viscous: false,
        darcy: false,
        brinkman: 0.0,
        bjsj: false,
        convection: false,
    };
    let zero_theta = vec![0.0; dofs.field_len(Field::Temperature)];
    let inputs = MomentumInputs { theta_coef: &zero_theta, u_lag: None };
    let (matrix, layout) = assemble_flow_matrix(mesh, dofs, None, terms, &inputs);
    let mut state = State::zeros(dofs, 0.0);
    state.u_f = u_f.to_vec();
    state.u_m = u_m.to_vec();
    let rhs = assemble_flow_rhs(mesh, dofs, &layout, &state, &zero_theta, &SchemeParams::new(1.0, 0.0, 1.0, 1.0, 0.0), 1.0, 1.0);
    SparseSystem::new(matrix, rhs, layout)
}

/// Velocity-only operator of the step (no pressure/multiplier coupling
/// removed) used by diagnostics: returns the full flow-layout matrix for the
/// given term selection.
pub(crate) fn flow_operator(
    mesh: &DecomposedMesh,
    dofs: &DofMap,
    material: Option<&MaterialModel>,
    terms: MomentumTerms,
    theta: &[f64],
    u_lag: Option<&[f64]>,
) -> (CsrMatrix, BlockLayout) {
    let inputs = MomentumInputs { theta_coef: theta, u_lag };
    assemble_flow_matrix(mesh, dofs, material, terms, &inputs)
}

/// Mass and stiffness matrices of a scalar P2 field restricted to its free
/// coefficients, ordered by free index.
pub fn scalar_mass_stiffness(mesh: &DecomposedMesh, dofs: &DofMap, field: Field) -> (CsrMatrix, CsrMatrix) {
    let sp = dofs.space(field);
    let fd = dofs.field(field);
    let n = fd.num_free();
    let start = fd.range.start;
    let mut mb = TripletBuilder::new(n, n);
    let mut kb = TripletBuilder::new(n, n);
    for (cell, &tri) in sp.cells().iter().enumerate() {
        let cq = CellQuad::new(mesh, tri);
        let nodes = sp.cell_nodes(cell);
        let mut m = [[0.0; 6]; 6];
        let mut k = [[0.0; 6]; 6];
        for q in 0..cq.len() {
            let phi = cq.phi(q);
            let d = &cq.dphi[q];
            for i in 0..6 {
                for j in 0..6 {
                    m[i][j] += cq.w[q] * phi[i] * phi[j];
                    k[i][j] += cq.w[q] * (d[i][0] * d[j][0] + d[i][1] * d[j][1]);
                }
            }
        }
        for i in 0..6 {
            let Some(gi) = fd.free[nodes[i]] else { continue };
            for j in 0..6 {
                let Some(gj) = fd.free[nodes[j]] else { continue };
                mb.add(gi - start, gj - start, m[i][j]);
                kb.add(gi - start, gj - start, k[i][j]);
            }
        }
    }
    (mb.build(), kb.build())
}
