//! Lagrange shape functions on the reference triangle.
//!
//! Local node order: vertices 0, 1, 2, then midpoints of edges (0,1), (1,2),
//! (2,0). Vector P2 basis function `2 i + c` is `phi_i e_c`.

use crate::error::{param_err, Result};
use crate::mesh::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    P1,
    P2,
    P2Vector,
}

impl ElementKind {
    pub fn num_dofs(self) -> usize {
        match self {
            ElementKind::P1 => 3,
            ElementKind::P2 => 6,
            ElementKind::P2Vector => 12,
        }
    }

    pub fn components(self) -> usize {
        match self {
            ElementKind::P2Vector => 2,
            _ => 1,
        }
    }
}

/// Basis values and reference gradients at one point. For vector elements
/// `values[k * 2 + c]` is component `c` of basis `k` and `grads` likewise.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeEval {
    pub kind: ElementKind,
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
}

pub fn shape_functions(kind: ElementKind, point: Point) -> Result<ShapeEval> {
    const TOL: f64 = 1e-12;
    let [x, y] = point;
    if !(x >= -TOL && y >= -TOL && x + y <= 1.0 + TOL) {
        return param_err(format!("point ({x}, {y}) is outside the reference triangle"));
    }
    let (values, grads) = match kind {
        ElementKind::P1 => (p1_values(point).to_vec(), P1_GRADS.to_vec()),
        ElementKind::P2 => (p2_values(point).to_vec(), p2_grads(point).to_vec()),
        ElementKind::P2Vector => {
            let v = p2_values(point);
            let g = p2_grads(point);
            let mut values = Vec::with_capacity(24);
            let mut grads = Vec::with_capacity(24);
            for i in 0..6 {
                for c in 0..2 {
                    for d in 0..2 {
                        values.push(if c == d { v[i] } else { 0.0 });
                        grads.push(if c == d { g[i] } else { [0.0, 0.0] });
                    }
                }
            }
            (values, grads)
        }
    };
    Ok(ShapeEval { kind, values, grads })
}

pub const P1_GRADS: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

#[inline]
pub fn p1_values([x, y]: Point) -> [f64; 3] {
    [1.0 - x - y, x, y]
}

#[inline]
pub fn p2_values(p: Point) -> [f64; 6] {
    let [l0, l1, l2] = p1_values(p);
    [
        l0 * (2.0 * l0 - 1.0),
        l1 * (2.0 * l1 - 1.0),
        l2 * (2.0 * l2 - 1.0),
        4.0 * l0 * l1,
        4.0 * l1 * l2,
        4.0 * l2 * l0,
    ]
}

#[inline]
pub fn p2_grads(p: Point) -> [[f64; 2]; 6] {
    let [l0, l1, l2] = p1_values(p);
    let g = P1_GRADS;
    let vert = |l: f64, gl: [f64; 2]| [(4.0 * l - 1.0) * gl[0], (4.0 * l - 1.0) * gl[1]];
    let edge = |la: f64, ga: [f64; 2], lb: f64, gb: [f64; 2]| {
        [4.0 * (la * gb[0] + lb * ga[0]), 4.0 * (la * gb[1] + lb * ga[1])]
    };
    [
        vert(l0, g[0]),
        vert(l1, g[1]),
        vert(l2, g[2]),
        edge(l0, g[0], l1, g[1]),
        edge(l1, g[1], l2, g[2]),
        edge(l2, g[2], l0, g[0]),
    ]
}

/// Reference coordinates of the six P2 nodes.
pub const P2_NODES: [Point; 6] = [
    [0.0, 0.0],
    [1.0, 0.0],
    [0.0, 1.0],
    [0.5, 0.0],
    [0.5, 0.5],
    [0.0, 0.5],
];

/// Affine map from the reference triangle onto a physical triangle.
#[derive(Debug, Clone, Copy)]
pub struct AffineMap {
    origin: Point,
    jac: [[f64; 2]; 2],
    /// `J^{-T}`, mapping reference gradients to physical gradients.
    inv_t: [[f64; 2]; 2],
    pub det: f64,
}

impl AffineMap {
    pub fn new(tri: &[Point; 3]) -> Self {
        let [a, b, c] = *tri;
        let jac = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv_t = [
            [jac[1][1] / det, -jac[1][0] / det],
            [-jac[0][1] / det, jac[0][0] / det],
        ];
        AffineMap { origin: a, jac, inv_t, det }
    }

    #[inline]
    pub fn map(&self, [x, y]: Point) -> Point {
        [
            self.origin[0] + self.jac[0][0] * x + self.jac[0][1] * y,
            self.origin[1] + self.jac[1][0] * x + self.jac[1][1] * y,
        ]
    }

    #[inline]
    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_t[0][0] * g[0] + self.inv_t[0][1] * g[1],
            self.inv_t[1][0] * g[0] + self.inv_t[1][1] * g[1],
        ]
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det.abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p1_vertex_delta() {
        let s = shape_functions(ElementKind::P1, [0.0, 0.0]).unwrap();
        assert_eq!(s.values, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn p2_midpoint_delta() {
        let s = shape_functions(ElementKind::P2, [0.5, 0.5]).unwrap();
        for (k, v) in s.values.iter().enumerate() {
            let expect = if k == 4 { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn lagrange_property_at_all_nodes() {
        for (i, &node) in P2_NODES.iter().enumerate() {
            let v = p2_values(node);
            for (j, &vj) in v.iter().enumerate() {
                assert!((vj - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
            if i < 3 {
                let v1 = p1_values(node);
                for (j, &vj) in v1.iter().enumerate() {
                    assert_eq!(vj, if i == j { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn partition_of_unity_and_gradient_sum() {
        for &p in &[[0.1, 0.2], [0.3, 0.6], [0.0, 1.0], [0.25, 0.25]] {
            for kind in [ElementKind::P1, ElementKind::P2] {
                let s = shape_functions(kind, p).unwrap();
                assert!((s.values.iter().sum::<f64>() - 1.0).abs() < 1e-14);
                let gx: f64 = s.grads.iter().map(|g| g[0]).sum();
                let gy: f64 = s.grads.iter().map(|g| g[1]).sum();
                assert!(gx.abs() < 1e-14 && gy.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn p2_gradients_match_finite_differences() {
        let p = [0.21, 0.37];
        let h = 1e-6;
        let g = p2_grads(p);
        let fx = p2_values([p[0] + h, p[1]]);
        let bx = p2_values([p[0] - h, p[1]]);
        let fy = p2_values([p[0], p[1] + h]);
        let by = p2_values([p[0], p[1] - h]);
        for i in 0..6 {
            assert!((g[i][0] - (fx[i] - bx[i]) / (2.0 * h)).abs() < 1e-8);
            assert!((g[i][1] - (fy[i] - by[i]) / (2.0 * h)).abs() < 1e-8);
        }
    }

    #[test]
    fn vector_kind_layout() {
        let s = shape_functions(ElementKind::P2Vector, [0.0, 0.0]).unwrap();
        assert_eq!(s.values.len(), 24);
        // basis 0 = phi_0 e_x: x-component 1, y-component 0 at vertex 0
        assert_eq!(s.values[0], 1.0);
        assert_eq!(s.values[1], 0.0);
        assert_eq!(s.values[3], 1.0);
        assert_eq!(ElementKind::P2Vector.num_dofs(), 12);
    }

    #[test]
    fn outside_point_rejected() {
        assert!(shape_functions(ElementKind::P1, [0.8, 0.5]).is_err());
        assert!(shape_functions(ElementKind::P2, [-0.1, 0.5]).is_err());
    }
}
