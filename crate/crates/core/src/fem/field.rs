//! Interpolation, point evaluation and norms of discrete fields.

use std::sync::OnceLock;

use crate::error::{param_err, Result};
use crate::mesh::{reference_coords, DecomposedMesh, Point, Region};

use super::quadrature::{quadrature_rule, segment_rule, QuadratureRule, SegmentRule};
use super::shape::{p1_values, p2_grads, p2_values, AffineMap, P1_GRADS};
use super::space::{Degree, NodalSpace};

/// Basis tables at the points of one triangle rule.
#[derive(Debug, Clone)]
pub struct RefTables {
    pub rule: QuadratureRule,
    pub p1: Vec<[f64; 3]>,
    pub p2: Vec<[f64; 6]>,
    pub p2_grad: Vec<[[f64; 2]; 6]>,
}

impl RefTables {
    pub fn new(degree: usize) -> Result<Self> {
        let rule = quadrature_rule(degree)?;
        let p1 = rule.points.iter().map(|&p| p1_values(p)).collect();
        let p2 = rule.points.iter().map(|&p| p2_values(p)).collect();
        let p2_grad = rule.points.iter().map(|&p| p2_grads(p)).collect();
        Ok(RefTables { rule, p1, p2, p2_grad })
    }

    pub fn len(&self) -> usize {
        self.rule.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rule.weights.is_empty()
    }
}

/// Degree-6 tables shared by assembly and diagnostics, so both integrate the
/// same discrete forms.
pub fn tables() -> &'static RefTables {
    static T: OnceLock<RefTables> = OnceLock::new();
    T.get_or_init(|| RefTables::new(6).expect("degree 6 is supported"))
}

/// Segment rule used on interface edges (exact to degree 7).
pub fn edge_rule() -> &'static SegmentRule {
    static R: OnceLock<SegmentRule> = OnceLock::new();
    R.get_or_init(|| segment_rule(7).expect("degree 7 is supported"))
}

/// Field value and physical gradient at a point. Scalar fields use component 0.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PointValue {
    pub value: [f64; 2],
    /// `grad[c] = [d/dx, d/dy]` of component `c`.
    pub grad: [[f64; 2]; 2],
}

/// Evaluates a field on cell `cell` at reference point `xi`.
pub fn eval_at_ref(space: &NodalSpace, coeffs: &[f64], cell: usize, map: &AffineMap, xi: Point) -> PointValue {
    let nodes = space.cell_nodes(cell);
    let comps = space.components();
    let mut out = PointValue::default();
    match space.degree() {
        Degree::P1 => {
            let v = p1_values(xi);
            for (k, &n) in nodes.iter().enumerate() {
                let g = map.grad(P1_GRADS[k]);
                for c in 0..comps {
                    let a = coeffs[comps * n + c];
                    out.value[c] += a * v[k];
                    out.grad[c][0] += a * g[0];
                    out.grad[c][1] += a * g[1];
                }
            }
        }
        Degree::P2 => {
            let v = p2_values(xi);
            let gr = p2_grads(xi);
            for (k, &n) in nodes.iter().enumerate() {
                let g = map.grad(gr[k]);
                for c in 0..comps {
                    let a = coeffs[comps * n + c];
                    out.value[c] += a * v[k];
                    out.grad[c][0] += a * g[0];
                    out.grad[c][1] += a * g[1];
                }
            }
        }
    }
    out
}

/// Values of a field at all quadrature points of `tables` on one cell.
pub fn eval_on_cell(
    space: &NodalSpace,
    coeffs: &[f64],
    cell: usize,
    map: &AffineMap,
    tables: &RefTables,
    out: &mut Vec<PointValue>,
) {
    out.clear();
    let nodes = space.cell_nodes(cell);
    let comps = space.components();
    for q in 0..tables.len() {
        let mut pv = PointValue::default();
        match space.degree() {
            Degree::P1 => {
                for (k, &n) in nodes.iter().enumerate() {
                    let g = map.grad(P1_GRADS[k]);
                    for c in 0..comps {
                        let a = coeffs[comps * n + c];
                        pv.value[c] += a * tables.p1[q][k];
                        pv.grad[c][0] += a * g[0];
                        pv.grad[c][1] += a * g[1];
                    }
                }
            }
            Degree::P2 => {
                for (k, &n) in nodes.iter().enumerate() {
                    let g = map.grad(tables.p2_grad[q][k]);
                    for c in 0..comps {
                        let a = coeffs[comps * n + c];
                        pv.value[c] += a * tables.p2[q][k];
                        pv.grad[c][0] += a * g[0];
                        pv.grad[c][1] += a * g[1];
                    }
                }
            }
        }
        out.push(pv);
    }
}

/// Nodal interpolant of a (possibly vector-valued) expression. Only the first
/// `space.components()` entries of the expression are used.
pub fn interpolate<F>(mesh: &DecomposedMesh, space: &NodalSpace, f: F) -> Result<Vec<f64>>
where
    F: Fn(Point) -> [f64; 2],
{
    let comps = space.components();
    let mut out = Vec::with_capacity(space.len());
    for i in 0..space.num_nodes() {
        let p = space.node_coords(mesh, i);
        let v = f(p);
        for &x in &v[..comps] {
            if !x.is_finite() {
                return param_err(format!("expression is not finite at ({}, {})", p[0], p[1]));
            }
            out.push(x);
        }
    }
    Ok(out)
}

pub fn interpolate_scalar<F>(mesh: &DecomposedMesh, space: &NodalSpace, f: F) -> Result<Vec<f64>>
where
    F: Fn(Point) -> f64,
{
    interpolate(mesh, space, |p| [f(p), 0.0])
}

fn check_len(space: &NodalSpace, coeffs: &[f64]) -> Result<()> {
    if coeffs.len() != space.len() {
        return param_err(format!(
            "coefficient vector has length {}, space expects {}",
            coeffs.len(),
            space.len()
        ));
    }
    Ok(())
}

/// Point evaluation; fails outside the space's region.
pub fn evaluate(mesh: &DecomposedMesh, space: &NodalSpace, coeffs: &[f64], point: Point) -> Result<[f64; 2]> {
    check_len(space, coeffs)?;
    let Some((tri, xi)) = mesh.locate(point, space.region()) else {
        return param_err(format!("point ({}, {}) is outside the field's region", point[0], point[1]));
    };
    let cell = space.cell_of(tri).expect("located triangle belongs to the space");
    let map = AffineMap::new(&mesh.triangle_coords(tri));
    Ok(eval_at_ref(space, coeffs, cell, &map, xi).value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormKind {
    L2,
    H1Semi,
    L4,
    L6,
    /// `L^6` norm of the gradient.
    W16Semi,
    /// `L^2` norm of the trace on the interface.
    InterfaceL2,
}

/// Norm of a field over its region, by degree-6 quadrature.
pub fn field_norm(mesh: &DecomposedMesh, space: &NodalSpace, coeffs: &[f64], norm: NormKind) -> Result<f64> {
    check_len(space, coeffs)?;
    if norm == NormKind::InterfaceL2 {
        return interface_l2(mesh, space, coeffs);
    }
    let t = tables();
    let comps = space.components();
    let mut vals = Vec::new();
    let mut acc = 0.0;
    for (cell, &tri) in space.cells().iter().enumerate() {
        let map = AffineMap::new(&mesh.triangle_coords(tri));
        eval_on_cell(space, coeffs, cell, &map, t, &mut vals);
        let mut local = 0.0;
        for (q, pv) in vals.iter().enumerate() {
            let v2: f64 = (0..comps).map(|c| pv.value[c] * pv.value[c]).sum();
            let g2: f64 = (0..comps).map(|c| pv.grad[c][0].powi(2) + pv.grad[c][1].powi(2)).sum();
            let integrand = match norm {
                NormKind::L2 => v2,
                NormKind::H1Semi => g2,
                NormKind::L4 => v2 * v2,
                NormKind::L6 => v2 * v2 * v2,
                NormKind::W16Semi => g2 * g2 * g2,
                NormKind::InterfaceL2 => unreachable!(),
            };
            local += t.rule.weights[q] * integrand;
        }
        acc += local * map.det.abs();
    }
    let p = match norm {
        NormKind::L2 | NormKind::H1Semi => 2.0,
        NormKind::L4 => 4.0,
        _ => 6.0,
    };
    Ok(acc.max(0.0).powf(1.0 / p))
}

fn interface_l2(mesh: &DecomposedMesh, space: &NodalSpace, coeffs: &[f64]) -> Result<f64> {
    let side = space.region().unwrap_or(Region::Free);
    let rule = edge_rule();
    let comps = space.components();
    let mut acc = 0.0;
    for fr in crate::mesh::interface_frames(mesh) {
        let (f, m) = mesh.interface_neighbors(fr.edge).expect("frame edges are conforming");
        let tri = if side == Region::Free { f } else { m };
        let cell = space.cell_of(tri).expect("interface triangle belongs to the space");
        let coords = mesh.triangle_coords(tri);
        let map = AffineMap::new(&coords);
        let [a, b] = mesh.edges()[fr.edge];
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            let p = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let xi = reference_coords(&coords, p);
            let v = eval_at_ref(space, coeffs, cell, &map, xi).value;
            acc += w * fr.length * (0..comps).map(|c| v[c] * v[c]).sum::<f64>();
        }
    }
    Ok(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_decomposed_mesh, GeometrySpec};
    use std::f64::consts::PI;

    fn square(n: usize) -> DecomposedMesh {
        build_decomposed_mesh(GeometrySpec::new(1.0, 0.5, 0.5).unwrap(), n, n / 2, n / 2).unwrap()
    }

    #[test]
    fn constant_reproduced_everywhere() {
        let mesh = square(4);
        let space = NodalSpace::new(&mesh, Degree::P2, None, 1);
        let c = interpolate_scalar(&mesh, &space, |_| 3.0).unwrap();
        for p in [[0.1, 0.1], [0.77, 0.5], [0.33, 0.91], [1.0, 1.0]] {
            assert!((evaluate(&mesh, &space, &c, p).unwrap()[0] - 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_exact_under_p2() {
        let mesh = square(4);
        let space = NodalSpace::new(&mesh, Degree::P2, Some(Region::Free), 2);
        let c = interpolate(&mesh, &space, |[x, y]| [x + 2.0 * y, 1.0 - y]).unwrap();
        let mut s: u64 = 12345;
        for _ in 0..50 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let x = (s >> 11) as f64 / (1u64 << 53) as f64;
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let y = 0.5 + 0.5 * (s >> 11) as f64 / (1u64 << 53) as f64;
            let v = evaluate(&mesh, &space, &c, [x, y]).unwrap();
            assert!((v[0] - (x + 2.0 * y)).abs() < 1e-13);
            assert!((v[1] - (1.0 - y)).abs() < 1e-13);
        }
    }

    #[test]
    fn evaluation_outside_region_fails() {
        let mesh = square(2);
        let space = NodalSpace::new(&mesh, Degree::P1, Some(Region::Matrix), 1);
        let c = vec![0.0; space.len()];
        assert!(evaluate(&mesh, &space, &c, [0.5, 0.9]).is_err());
        assert!(evaluate(&mesh, &space, &c[1..], [0.5, 0.1]).is_err());
    }

    fn interpolation_error(n: usize) -> f64 {
        let mesh = square(n);
        let space = NodalSpace::new(&mesh, Degree::P2, None, 1);
        let f = |[x, y]: Point| (PI * x).sin() * (PI * y).sin();
        let c = interpolate_scalar(&mesh, &space, f).unwrap();
        let t = tables();
        let mut vals = Vec::new();
        let mut err = 0.0;
        for (cell, &tri) in space.cells().iter().enumerate() {
            let map = AffineMap::new(&mesh.triangle_coords(tri));
            eval_on_cell(&space, &c, cell, &map, t, &mut vals);
            for (q, pv) in vals.iter().enumerate() {
                let d = pv.value[0] - f(map.map(t.rule.points[q]));
                err += t.rule.weights[q] * map.det.abs() * d * d;
            }
        }
        err.sqrt()
    }

    #[test]
    fn p2_interpolation_converges_third_order() {
        let coarse = interpolation_error(8);
        let fine = interpolation_error(16);
        assert!(coarse / fine >= 7.0, "ratio {}", coarse / fine);
    }

    #[test]
    fn norms_of_simple_fields() {
        let mesh = square(4);
        let space = NodalSpace::new(&mesh, Degree::P2, Some(Region::Free), 1);
        let zero = vec![0.0; space.len()];
        for kind in [NormKind::L2, NormKind::H1Semi, NormKind::L4, NormKind::L6, NormKind::W16Semi, NormKind::InterfaceL2] {
            assert_eq!(field_norm(&mesh, &space, &zero, kind).unwrap(), 0.0);
        }
        let two = vec![2.0; space.len()];
        let l2 = field_norm(&mesh, &space, &two, NormKind::L2).unwrap();
        assert!((l2 - 2.0 * 0.5f64.sqrt()).abs() < 1e-14);
        let tr = field_norm(&mesh, &space, &two, NormKind::InterfaceL2).unwrap();
        assert!((tr - 2.0).abs() < 1e-14);
    }

    #[test]
    fn bubble_l2_norm() {
        // ||x(1-x)y(1-y)||^2 = (1/30)^2 on the unit square.
        let mesh = square(8);
        let space = NodalSpace::new(&mesh, Degree::P2, None, 1);
        let c = interpolate_scalar(&mesh, &space, |[x, y]| x * (1.0 - x) * y * (1.0 - y)).unwrap();
        let l2 = field_norm(&mesh, &space, &c, NormKind::L2).unwrap();
        assert!((l2 - 1.0 / 30.0).abs() < 1e-4, "{l2}");
    }

    #[test]
    fn norms_are_absolutely_homogeneous() {
        let mesh = square(4);
        let space = NodalSpace::new(&mesh, Degree::P2, Some(Region::Matrix), 2);
        let c = interpolate(&mesh, &space, |[x, y]| [(3.0 * x).sin() + y, x * y - 0.2]).unwrap();
        for kind in [NormKind::L2, NormKind::H1Semi, NormKind::L4, NormKind::L6, NormKind::W16Semi, NormKind::InterfaceL2] {
            let base = field_norm(&mesh, &space, &c, kind).unwrap();
            for s in [-2.0, 0.5, 10.0] {
                let scaled: Vec<f64> = c.iter().map(|v| s * v).collect();
                let n = field_norm(&mesh, &space, &scaled, kind).unwrap();
                assert!((n - s.abs() * base).abs() <= 1e-12 * n.max(1e-300), "{kind:?} {s}");
            }
        }
    }
}
