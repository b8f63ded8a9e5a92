//! Nodal Lagrange spaces restricted to a region, and the P1 interface space
//! carrying the normal-continuity multiplier.

use crate::mesh::{interface_frames, BoundaryTag, DecomposedMesh, InterfaceFrame, Point, Region};

use super::shape::ElementKind;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Degree {
    P1,
    P2,
}

/// Continuous Lagrange space on the triangles of one region (or all of them).
///
/// Nodes are mesh P2 node ids (vertex ids, then `nv + edge`) in increasing
/// order, so vertices come before edge midpoints. Vector coefficients are
/// interleaved: `2 * node + component`.
#[derive(Debug, Clone)]
pub struct NodalSpace {
    degree: Degree,
    region: Option<Region>,
    components: usize,
    nodes: Vec<usize>,
    local: Vec<usize>,
    cells: Vec<usize>,
    cell_of_tri: Vec<usize>,
    cell_nodes: Vec<[usize; 6]>,
}

impl NodalSpace {
    pub fn new(mesh: &DecomposedMesh, degree: Degree, region: Option<Region>, components: usize) -> Self {
        let cells: Vec<usize> = (0..mesh.num_triangles())
            .filter(|&t| region.is_none_or(|r| mesh.triangles()[t].region == r))
            .collect();
        let per_cell = match degree {
            Degree::P1 => 3,
            Degree::P2 => 6,
        };
        let mut used = vec![false; mesh.num_p2_nodes()];
        for &t in &cells {
            for &n in &mesh.triangle_p2_nodes(t)[..per_cell] {
                used[n] = true;
            }
        }
        let nodes: Vec<usize> = (0..used.len()).filter(|&n| used[n]).collect();
        let mut local = vec![NONE; used.len()];
        for (i, &n) in nodes.iter().enumerate() {
            local[n] = i;
        }
        let mut cell_of_tri = vec![NONE; mesh.num_triangles()];
        let mut cell_nodes = Vec::with_capacity(cells.len());
        for (c, &t) in cells.iter().enumerate() {
            cell_of_tri[t] = c;
            let g = mesh.triangle_p2_nodes(t);
            let mut l = [NONE; 6];
            for k in 0..per_cell {
                l[k] = local[g[k]];
            }
            cell_nodes.push(l);
        }
        NodalSpace { degree, region, components, nodes, local, cells, cell_of_tri, cell_nodes }
    }

    pub fn degree(&self) -> Degree {
        self.degree
    }

    pub fn region(&self) -> Option<Region> {
        self.region
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn kind(&self) -> ElementKind {
        match (self.degree, self.components) {
            (Degree::P1, _) => ElementKind::P1,
            (Degree::P2, 1) => ElementKind::P2,
            (Degree::P2, _) => ElementKind::P2Vector,
        }
    }

    pub fn nodes_per_cell(&self) -> usize {
        match self.degree {
            Degree::P1 => 3,
            Degree::P2 => 6,
        }
    }

    /// Mesh node ids of the space's nodes.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of coefficients (`nodes * components`).
    pub fn len(&self) -> usize {
        self.nodes.len() * self.components
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn local_node(&self, mesh_node: usize) -> Option<usize> {
        self.local.get(mesh_node).copied().filter(|&l| l != NONE)
    }

    /// Triangles of the space, in increasing order.
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn cell_of(&self, triangle: usize) -> Option<usize> {
        self.cell_of_tri.get(triangle).copied().filter(|&c| c != NONE)
    }

    /// Local node indices of a cell (3 for P1, 6 for P2).
    pub fn cell_nodes(&self, cell: usize) -> &[usize] {
        &self.cell_nodes[cell][..self.nodes_per_cell()]
    }

    pub fn node_coords(&self, mesh: &DecomposedMesh, node: usize) -> Point {
        mesh.p2_node_coords(self.nodes[node])
    }
}

/// One interface edge with its adjacent triangles and multiplier nodes.
#[derive(Debug, Clone, Copy)]
pub struct InterfaceSegment {
    pub frame: InterfaceFrame,
    pub free_triangle: usize,
    pub matrix_triangle: usize,
    pub endpoints: [Point; 2],
    /// Local multiplier node indices of the two endpoints.
    pub nodes: [usize; 2],
}

/// Continuous P1 space on the interface vertices.
#[derive(Debug, Clone)]
pub struct InterfaceSpace {
    vertices: Vec<usize>,
    segments: Vec<InterfaceSegment>,
}

impl InterfaceSpace {
    pub fn new(mesh: &DecomposedMesh) -> Self {
        let frames = interface_frames(mesh);
        let mut vertices: Vec<usize> = frames.iter().flat_map(|f| mesh.edges()[f.edge]).collect();
        vertices.sort_unstable();
        vertices.dedup();
        let segments = frames
            .into_iter()
            .map(|frame| {
                let [a, b] = mesh.edges()[frame.edge];
                let (free_triangle, matrix_triangle) =
                    mesh.interface_neighbors(frame.edge).expect("frames exist only for conforming edges");
                let pos = |v: usize| vertices.binary_search(&v).unwrap();
                InterfaceSegment {
                    frame,
                    free_triangle,
                    matrix_triangle,
                    endpoints: [mesh.vertices()[a], mesh.vertices()[b]],
                    nodes: [pos(a), pos(b)],
                }
            })
            .collect();
        InterfaceSpace { vertices, segments }
    }

    /// Mesh vertex ids of the interface nodes.
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn segments(&self) -> &[InterfaceSegment] {
        &self.segments
    }

    pub fn measure(&self) -> f64 {
        self.segments.iter().map(|s| s.frame.length).sum()
    }
}

/// Per-node boundary classification of the mesh P2 nodes.
#[derive(Debug, Clone)]
pub(crate) struct NodeTags {
    pub gamma_f: Vec<bool>,
    pub gamma_i: Vec<bool>,
    /// Velocity components forced to zero by `u . n = 0` on `Gamma_m`.
    pub gamma_m_zero: Vec<[bool; 2]>,
    pub gamma_m: Vec<bool>,
}

impl NodeTags {
    pub fn new(mesh: &DecomposedMesh) -> Self {
        let n = mesh.num_p2_nodes();
        let nv = mesh.num_vertices();
        let mut tags = NodeTags {
            gamma_f: vec![false; n],
            gamma_i: vec![false; n],
            gamma_m_zero: vec![[false; 2]; n],
            gamma_m: vec![false; n],
        };
        for be in mesh.boundary_edges() {
            let Some(edge) = be.edge else { continue };
            let [a, b] = be.vertices;
            let nodes = [a, b, nv + edge];
            match be.tag {
                BoundaryTag::GammaF => nodes.iter().for_each(|&k| tags.gamma_f[k] = true),
                BoundaryTag::GammaI => nodes.iter().for_each(|&k| tags.gamma_i[k] = true),
                BoundaryTag::GammaM => {
                    let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
                    // Boundary is axis-aligned: a horizontal edge fixes v_y, a
                    // vertical edge fixes v_x.
                    let zero = if (pa[1] - pb[1]).abs() <= (pa[0] - pb[0]).abs() {
                        1
                    } else {
                        0
                    };
                    for &k in &nodes {
                        tags.gamma_m[k] = true;
                        tags.gamma_m_zero[k][zero] = true;
                    }
                }
            }
        }
        tags
    }
}
