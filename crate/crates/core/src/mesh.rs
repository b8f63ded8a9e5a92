//! Layered triangulation of the free-fluid region stacked on top of the
//! porous matrix, with tagged outer boundaries and interface frames.
//!
//! The domain is `[0, Lx] x [0, Hm + Hf]`; the matrix occupies `y < Hm` and
//! the free fluid `y > Hm`. Boundary tags:
//!
//! - `GammaF`: top side and the lateral sides of the free layer,
//! - `GammaM`: bottom side and the lateral sides of the matrix layer,
//! - `GammaI`: the interface `y = Hm` (an interior edge set).

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Free,
    Matrix,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Free => "free",
            Region::Matrix => "matrix",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    GammaF,
    GammaM,
    GammaI,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::GammaF => "Gamma_f",
            BoundaryTag::GammaM => "Gamma_m",
            BoundaryTag::GammaI => "Gamma_i",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "Gamma_f" => Some(BoundaryTag::GammaF),
            "Gamma_m" => Some(BoundaryTag::GammaM),
            "Gamma_i" => Some(BoundaryTag::GammaI),
            _ => None,
        }
    }
}

/// Extent of the two layers and the buoyancy direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub width: f64,
    pub matrix_height: f64,
    pub free_height: f64,
    /// Upward unit vector `k`.
    pub gravity_direction: Point,
}

impl GeometrySpec {
    pub fn new(width: f64, matrix_height: f64, free_height: f64) -> Result<Self> {
        let g = GeometrySpec {
            width,
            matrix_height,
            free_height,
            gravity_direction: [0.0, 1.0],
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("width", self.width),
            ("matrix_height", self.matrix_height),
            ("free_height", self.free_height),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return param_err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        let [kx, ky] = self.gravity_direction;
        if ((kx * kx + ky * ky).sqrt() - 1.0).abs() > 1e-14 {
            return param_err("gravity direction must be a unit vector");
        }
        Ok(())
    }

    pub fn interface_y(&self) -> f64 {
        self.matrix_height
    }

    pub fn height(&self) -> f64 {
        self.matrix_height + self.free_height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub vertices: [usize; 3],
    pub region: Region,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
    /// Index into [`DecomposedMesh::edges`], if the pair is an edge of some triangle.
    pub edge: Option<usize>,
}

/// Orthonormal frame of one interface edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceFrame {
    pub edge: usize,
    /// Unit normal pointing from the free region into the matrix.
    pub normal: Point,
    pub tangent: Point,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct GridInfo {
    nx: usize,
    ny_f: usize,
    ny_m: usize,
}

#[derive(Debug, Clone)]
pub struct DecomposedMesh {
    geometry: GeometrySpec,
    vertices: Vec<Point>,
    triangles: Vec<Triangle>,
    boundary_edges: Vec<BoundaryEdge>,
    edges: Vec<[usize; 2]>,
    triangle_edges: Vec<[usize; 3]>,
    edge_triangles: Vec<Vec<usize>>,
    grid: Option<GridInfo>,
}

/// Builds the structured layered mesh: `nx` columns, `ny_m` matrix rows below
/// `ny_f` free rows, every cell split along its lower-left to upper-right
/// diagonal.
pub fn build_decomposed_mesh(
    geom: GeometrySpec,
    nx: usize,
    ny_f: usize,
    ny_m: usize,
) -> Result<DecomposedMesh> {
    geom.validate()?;
    if nx == 0 || ny_f == 0 || ny_m == 0 {
        return param_err(format!(
            "cell counts must be positive, got nx={nx}, ny_f={ny_f}, ny_m={ny_m}"
        ));
    }
    let ny = ny_f + ny_m;
    let hm = geom.matrix_height;
    let row_y = |j: usize| -> f64 {
        if j <= ny_m {
            hm * j as f64 / ny_m as f64
        } else {
            hm + geom.free_height * (j - ny_m) as f64 / ny_f as f64
        }
    };
    let vid = |i: usize, j: usize| j * (nx + 1) + i;

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = row_y(j);
        for i in 0..=nx {
            vertices.push([geom.width * i as f64 / nx as f64, y]);
        }
    }

    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        let region = if j < ny_m { Region::Matrix } else { Region::Free };
        for i in 0..nx {
            let v00 = vid(i, j);
            let v10 = vid(i + 1, j);
            let v01 = vid(i, j + 1);
            let v11 = vid(i + 1, j + 1);
            triangles.push(Triangle { vertices: [v00, v10, v11], region });
            triangles.push(Triangle { vertices: [v00, v11, v01], region });
        }
    }

    let mut boundary = Vec::new();
    for i in 0..nx {
        boundary.push((vid(i, 0), vid(i + 1, 0), BoundaryTag::GammaM));
    }
    for i in 0..nx {
        boundary.push((vid(i, ny_m), vid(i + 1, ny_m), BoundaryTag::GammaI));
    }
    for i in 0..nx {
        boundary.push((vid(i, ny), vid(i + 1, ny), BoundaryTag::GammaF));
    }
    for j in 0..ny {
        let tag = if j < ny_m { BoundaryTag::GammaM } else { BoundaryTag::GammaF };
        boundary.push((vid(0, j), vid(0, j + 1), tag));
        boundary.push((vid(nx, j), vid(nx, j + 1), tag));
    }

    let boundary_edges = boundary
        .into_iter()
        .map(|(a, b, tag)| BoundaryEdge { vertices: [a, b], tag, edge: None })
        .collect();
    let mut mesh = DecomposedMesh::from_parts(geom, vertices, triangles, boundary_edges)?;
    mesh.grid = Some(GridInfo { nx, ny_f, ny_m });
    Ok(mesh)
}

impl DecomposedMesh {
    /// Assembles a mesh from raw parts and derives edge adjacency. No
    /// invariant is checked here; see [`validate_mesh`].
    pub fn from_parts(
        geometry: GeometrySpec,
        vertices: Vec<Point>,
        triangles: Vec<Triangle>,
        mut boundary_edges: Vec<BoundaryEdge>,
    ) -> Result<Self> {
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.vertices.iter().any(|&v| v >= nv) {
                return Err(Error::MeshFormat(format!("triangle {t} references a missing vertex")));
            }
        }
        let mut edge_ids = std::collections::HashMap::new();
        let mut edges = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        let mut edge_triangles: Vec<Vec<usize>> = Vec::new();
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0; 3];
            for k in 0..3 {
                let a = tri.vertices[k];
                let b = tri.vertices[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_triangles.push(Vec::new());
                    edges.len() - 1
                });
                edge_triangles[id].push(t);
                te[k] = id;
            }
            triangle_edges.push(te);
        }
        for be in &mut boundary_edges {
            let [a, b] = be.vertices;
            if a >= nv || b >= nv {
                return Err(Error::MeshFormat("boundary edge references a missing vertex".into()));
            }
            be.edge = edge_ids.get(&(a.min(b), a.max(b))).copied();
        }
        Ok(DecomposedMesh {
            geometry,
            vertices,
            triangles,
            boundary_edges,
            edges,
            triangle_edges,
            edge_triangles,
            grid: None,
        })
    }

    pub fn geometry(&self) -> &GeometrySpec {
        &self.geometry
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn edge_triangles(&self, edge: usize) -> &[usize] {
        &self.edge_triangles[edge]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Number of quadratic Lagrange nodes: vertices followed by edge midpoints.
    pub fn num_p2_nodes(&self) -> usize {
        self.vertices.len() + self.edges.len()
    }

    /// Coordinates of a P2 node (vertex ids first, then `nv + edge`).
    pub fn p2_node_coords(&self, node: usize) -> Point {
        let nv = self.vertices.len();
        if node < nv {
            self.vertices[node]
        } else {
            let [a, b] = self.edges[node - nv];
            midpoint(self.vertices[a], self.vertices[b])
        }
    }

    /// The six P2 node ids of a triangle: three vertices, then the midpoints of
    /// edges (0,1), (1,2), (2,0).
    pub fn triangle_p2_nodes(&self, t: usize) -> [usize; 6] {
        let nv = self.vertices.len();
        let v = self.triangles[t].vertices;
        let e = self.triangle_edges[t];
        [v[0], v[1], v[2], nv + e[0], nv + e[1], nv + e[2]]
    }

    pub fn triangle_coords(&self, t: usize) -> [Point; 3] {
        let v = self.triangles[t].vertices;
        [self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(t);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangle_coords(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    pub fn boundary_measure(&self, tag: BoundaryTag) -> f64 {
        self.edges_with_tag(tag)
            .map(|e| dist(self.vertices[e.vertices[0]], self.vertices[e.vertices[1]]))
            .sum()
    }

    pub fn triangles_in(&self, region: Region) -> impl Iterator<Item = usize> + '_ {
        self.triangles
            .iter()
            .enumerate()
            .filter(move |(_, t)| t.region == region)
            .map(|(i, _)| i)
    }

    /// The free and matrix triangle sharing an interface edge, if the mesh is
    /// conforming there.
    pub fn interface_neighbors(&self, edge: usize) -> Option<(usize, usize)> {
        let tris = &self.edge_triangles[edge];
        if tris.len() != 2 {
            return None;
        }
        let (a, b) = (tris[0], tris[1]);
        match (self.triangles[a].region, self.triangles[b].region) {
            (Region::Free, Region::Matrix) => Some((a, b)),
            (Region::Matrix, Region::Free) => Some((b, a)),
            _ => None,
        }
    }

    /// Locates `p` in a triangle of `region` (any region if `None`), returning
    /// the triangle and the reference coordinates of `p` in it.
    pub fn locate(&self, p: Point, region: Option<Region>) -> Option<(usize, Point)> {
        const TOL: f64 = 1e-12;
        let accept = |t: usize| -> Option<(usize, Point)> {
            if region.is_some_and(|r| self.triangles[t].region != r) {
                return None;
            }
            let xi = reference_coords(&self.triangle_coords(t), p);
            (xi[0] >= -TOL && xi[1] >= -TOL && xi[0] + xi[1] <= 1.0 + TOL).then_some((t, xi))
        };
        if let Some(g) = self.grid {
            let geom = &self.geometry;
            let col = ((p[0] / geom.width) * g.nx as f64).floor() as isize;
            let row = if p[1] <= geom.matrix_height {
                ((p[1] / geom.matrix_height) * g.ny_m as f64).floor() as isize
            } else {
                g.ny_m as isize
                    + (((p[1] - geom.matrix_height) / geom.free_height) * g.ny_f as f64).floor()
                        as isize
            };
            let ny = (g.ny_f + g.ny_m) as isize;
            for dr in [0isize, -1, 1] {
                for dc in [0isize, -1, 1] {
                    let (r, c) = (row + dr, col + dc);
                    if r < 0 || c < 0 || r >= ny || c >= g.nx as isize {
                        continue;
                    }
                    let base = 2 * (r as usize * g.nx + c as usize);
                    for t in [base, base + 1] {
                        if let Some(hit) = accept(t) {
                            return Some(hit);
                        }
                    }
                }
            }
            return None;
        }
        (0..self.triangles.len()).find_map(accept)
    }
}

/// One frame per interface edge, in boundary-edge order. Edges that are not
/// shared by a free and a matrix triangle are skipped (see [`validate_mesh`]).
pub fn interface_frames(mesh: &DecomposedMesh) -> Vec<InterfaceFrame> {
    let mut frames = Vec::new();
    for be in mesh.edges_with_tag(BoundaryTag::GammaI) {
        let Some(edge) = be.edge else { continue };
        let Some((free_tri, _)) = mesh.interface_neighbors(edge) else {
            continue;
        };
        let [a, b] = mesh.edges[edge];
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let length = dist(pa, pb);
        let t = [(pb[0] - pa[0]) / length, (pb[1] - pa[1]) / length];
        let mut n = [t[1], -t[0]];
        let c = mesh.centroid(free_tri);
        let m = midpoint(pa, pb);
        if n[0] * (m[0] - c[0]) + n[1] * (m[1] - c[1]) < 0.0 {
            n = [-n[0], -n[1]];
        }
        let tangent = [-n[1], n[0]];
        frames.push(InterfaceFrame { edge, normal: n, tangent, length });
    }
    frames
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    InvalidGeometry(String),
    NonPositiveArea { triangle: usize, area: f64 },
    StraddlesInterface { triangle: usize },
    WrongRegion { triangle: usize, region: Region },
    NonConformingInterface { boundary_edge: usize, reason: String },
    InterfaceOrientation { edge: usize },
    FrameNotOrthonormal { edge: usize },
    EmptyBoundary(BoundaryTag),
    AreaMismatch { total: f64, expected: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::InvalidGeometry(s) => write!(f, "invalid geometry: {s}"),
            Violation::NonPositiveArea { triangle, area } => {
                write!(f, "triangle {triangle} has non-positive signed area {area:e}")
            }
            Violation::StraddlesInterface { triangle } => {
                write!(f, "triangle {triangle} straddles the interface")
            }
            Violation::WrongRegion { triangle, region } => {
                write!(f, "triangle {triangle} tagged {} lies in the other layer", region.as_str())
            }
            Violation::NonConformingInterface { boundary_edge, reason } => {
                write!(f, "interface edge {boundary_edge} is non-conforming: {reason}")
            }
            Violation::InterfaceOrientation { edge } => {
                write!(f, "interface edge {edge}: free triangle is not above the matrix triangle")
            }
            Violation::FrameNotOrthonormal { edge } => {
                write!(f, "interface edge {edge}: frame is not orthonormal")
            }
            Violation::EmptyBoundary(tag) => write!(f, "{} has zero measure", tag.as_str()),
            Violation::AreaMismatch { total, expected } => {
                write!(f, "triangle areas sum to {total}, expected {expected}")
            }
        }
    }
}

/// Checks every structural invariant of a decomposed mesh. An empty list means
/// the mesh is valid.
pub fn validate_mesh(mesh: &DecomposedMesh) -> Vec<Violation> {
    let mut out = Vec::new();
    let geom = &mesh.geometry;
    if let Err(e) = geom.validate() {
        out.push(Violation::InvalidGeometry(e.to_string()));
        return out;
    }
    let yi = geom.interface_y();
    let tol = 1e-12 * geom.height();

    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        let area = mesh.signed_area(t);
        total += area.abs();
        if area <= 0.0 {
            out.push(Violation::NonPositiveArea { triangle: t, area });
        }
        let ys = mesh.triangle_coords(t).map(|p| p[1]);
        let above = ys.iter().any(|&y| y > yi + tol);
        let below = ys.iter().any(|&y| y < yi - tol);
        if above && below {
            out.push(Violation::StraddlesInterface { triangle: t });
        } else {
            let region = mesh.triangles[t].region;
            let misplaced = match region {
                Region::Free => below,
                Region::Matrix => above,
            };
            if misplaced {
                out.push(Violation::WrongRegion { triangle: t, region });
            }
        }
    }
    let expected = geom.area();
    if (total - expected).abs() > 1e-12 * expected {
        out.push(Violation::AreaMismatch { total, expected });
    }

    for (i, be) in mesh.boundary_edges.iter().enumerate() {
        if be.tag != BoundaryTag::GammaI {
            continue;
        }
        let Some(edge) = be.edge else {
            out.push(Violation::NonConformingInterface {
                boundary_edge: i,
                reason: "not an edge of any triangle".into(),
            });
            continue;
        };
        let Some((f, m)) = mesh.interface_neighbors(edge) else {
            out.push(Violation::NonConformingInterface {
                boundary_edge: i,
                reason: format!(
                    "expected one free and one matrix triangle, found {} adjacent triangles",
                    mesh.edge_triangles[edge].len()
                ),
            });
            continue;
        };
        let on_interface = be.vertices.iter().all(|&v| (mesh.vertices[v][1] - yi).abs() <= tol);
        if !on_interface {
            out.push(Violation::NonConformingInterface {
                boundary_edge: i,
                reason: "endpoints are not on the interface line".into(),
            });
        }
        if mesh.centroid(f)[1] <= mesh.centroid(m)[1] {
            out.push(Violation::InterfaceOrientation { edge });
        }
    }
    // Every edge on the interface line that borders a matrix triangle must be
    // an interface edge shared with a free triangle.
    for (e, &[a, b]) in mesh.edges.iter().enumerate() {
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        if (pa[1] - yi).abs() > tol || (pb[1] - yi).abs() > tol {
            continue;
        }
        let tris = &mesh.edge_triangles[e];
        if tris.len() == 1 && pa[0] > tol && pa[0] < geom.width - tol {
            out.push(Violation::NonConformingInterface {
                boundary_edge: e,
                reason: "interface segment bounded by a single triangle".into(),
            });
        }
    }

    for fr in interface_frames(mesh) {
        let [nx, ny] = fr.normal;
        let [tx, ty] = fr.tangent;
        let ok = ((nx * nx + ny * ny).sqrt() - 1.0).abs() < 1e-14
            && ((tx * tx + ty * ty).sqrt() - 1.0).abs() < 1e-14
            && (nx * tx + ny * ty).abs() < 1e-14;
        if !ok {
            out.push(Violation::FrameNotOrthonormal { edge: fr.edge });
        }
    }

    for tag in [BoundaryTag::GammaM, BoundaryTag::GammaI] {
        if mesh.boundary_measure(tag) <= 0.0 {
            out.push(Violation::EmptyBoundary(tag));
        }
    }
    out
}

/// Writes the `nsdb-mesh v1` text format.
pub fn write_mesh<W: Write>(mesh: &DecomposedMesh, mut w: W) -> std::io::Result<()> {
    w.write_all(mesh_to_string(mesh).as_bytes())
}

pub fn mesh_to_string(mesh: &DecomposedMesh) -> String {
    let mut s = String::from("nsdb-mesh v1\n");
    let _ = writeln!(s, "{}", mesh.vertices.len());
    for p in &mesh.vertices {
        let _ = writeln!(s, "{:.16e} {:.16e}", p[0], p[1]);
    }
    let _ = writeln!(s, "{}", mesh.triangles.len());
    for t in &mesh.triangles {
        let [a, b, c] = t.vertices;
        let _ = writeln!(s, "{a} {b} {c} {}", t.region.as_str());
    }
    let _ = writeln!(s, "{}", mesh.boundary_edges.len());
    for e in &mesh.boundary_edges {
        let [a, b] = e.vertices;
        let _ = writeln!(s, "{a} {b} {}", e.tag.as_str());
    }
    s
}

/// Parses the `nsdb-mesh v1` format. The geometry is recovered from the
/// bounding box and the interface edges.
pub fn parse_mesh(text: &str) -> Result<DecomposedMesh> {
    let bad = |m: &str| Error::MeshFormat(m.to_string());
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    if lines.next() != Some("nsdb-mesh v1") {
        return Err(bad("missing `nsdb-mesh v1` header"));
    }
    let count = |what: &str, lines: &mut dyn Iterator<Item = &str>| -> Result<usize> {
        lines
            .next()
            .and_then(|l| l.parse().ok())
            .ok_or_else(|| bad(&format!("expected {what} count")))
    };
    let nv = count("vertex", &mut lines)?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let l = lines.next().ok_or_else(|| bad("truncated vertex list"))?;
        let xs: Vec<f64> = l.split_whitespace().map(str::parse).collect::<Result<_, _>>().map_err(|_| bad("bad coordinate"))?;
        if xs.len() != 2 {
            return Err(bad("vertex line needs two coordinates"));
        }
        vertices.push([xs[0], xs[1]]);
    }
    let nt = count("triangle", &mut lines)?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let l = lines.next().ok_or_else(|| bad("truncated triangle list"))?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(bad("triangle line needs three ids and a region"));
        }
        let mut v = [0usize; 3];
        for k in 0..3 {
            v[k] = parts[k].parse().map_err(|_| bad("bad vertex id"))?;
        }
        let region = match parts[3] {
            "free" => Region::Free,
            "matrix" => Region::Matrix,
            other => return Err(bad(&format!("unknown region `{other}`"))),
        };
        triangles.push(Triangle { vertices: v, region });
    }
    let nb = count("boundary edge", &mut lines)?;
    let mut boundary = Vec::with_capacity(nb);
    for _ in 0..nb {
        let l = lines.next().ok_or_else(|| bad("truncated boundary list"))?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(bad("boundary line needs two ids and a tag"));
        }
        let a = parts[0].parse().map_err(|_| bad("bad vertex id"))?;
        let b = parts[1].parse().map_err(|_| bad("bad vertex id"))?;
        let tag = BoundaryTag::parse(parts[2]).ok_or_else(|| bad("unknown boundary tag"))?;
        boundary.push(BoundaryEdge { vertices: [a, b], tag, edge: None });
    }

    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in &vertices {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let yi = boundary
        .iter()
        .find(|e| e.tag == BoundaryTag::GammaI)
        .and_then(|e| vertices.get(e.vertices[0]))
        .map(|p| p[1])
        .ok_or_else(|| bad("no interface edges"))?;
    if x0 != 0.0 || y0 != 0.0 {
        return Err(bad("domain must start at the origin"));
    }
    let geometry = GeometrySpec::new(x1, yi, y1 - yi)?;
    DecomposedMesh::from_parts(geometry, vertices, triangles, boundary)
}

pub(crate) fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
}

/// Reference coordinates of `p` under the affine map of triangle `tri`.
pub(crate) fn reference_coords(tri: &[Point; 3], p: Point) -> Point {
    let [a, b, c] = *tri;
    let (j00, j01, j10, j11) = (b[0] - a[0], c[0] - a[0], b[1] - a[1], c[1] - a[1]);
    let det = j00 * j11 - j01 * j10;
    let (dx, dy) = (p[0] - a[0], p[1] - a[1]);
    [(j11 * dx - j01 * dy) / det, (-j10 * dx + j00 * dy) / det]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_layers() -> GeometrySpec {
        GeometrySpec::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn smallest_mesh_counts() {
        let m = build_decomposed_mesh(unit_layers(), 1, 1, 1).unwrap();
        assert_eq!(m.num_vertices(), 6);
        assert_eq!(m.num_triangles(), 4);
        assert_eq!(m.triangles_in(Region::Free).count(), 2);
        assert_eq!(m.triangles_in(Region::Matrix).count(), 2);
        assert_eq!(m.edges_with_tag(BoundaryTag::GammaI).count(), 1);
    }

    #[test]
    fn structured_counts() {
        let m = build_decomposed_mesh(unit_layers(), 4, 3, 2).unwrap();
        assert_eq!(m.num_vertices(), 30);
        assert_eq!(m.num_triangles(), 40);
        assert_eq!(interface_frames(&m).len(), 4);
    }

    #[test]
    fn frames_on_split_unit_square() {
        let g = GeometrySpec::new(1.0, 0.5, 0.5).unwrap();
        let m = build_decomposed_mesh(g, 2, 3, 3).unwrap();
        let frames = interface_frames(&m);
        assert_eq!(frames.len(), 2);
        for f in &frames {
            assert_eq!(f.normal, [0.0, -1.0]);
            assert_eq!(f.tangent, [1.0, 0.0]);
            assert!((f.length - 0.5).abs() < 1e-15);
            assert_eq!(f.normal[0] * f.tangent[0] + f.normal[1] * f.tangent[1], 0.0);
        }
        let total: f64 = frames.iter().map(|f| f.length).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(build_decomposed_mesh(unit_layers(), 0, 1, 1).is_err());
        assert!(build_decomposed_mesh(unit_layers(), 1, 0, 1).is_err());
        assert!(build_decomposed_mesh(unit_layers(), 1, 1, 0).is_err());
        assert!(GeometrySpec::new(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn built_mesh_is_valid() {
        let m = build_decomposed_mesh(unit_layers(), 3, 2, 4).unwrap();
        assert!(validate_mesh(&m).is_empty());
    }

    #[test]
    fn reversed_triangle_is_reported() {
        let m = build_decomposed_mesh(unit_layers(), 2, 2, 2).unwrap();
        let mut tris = m.triangles().to_vec();
        tris[3].vertices.swap(1, 2);
        let bad = DecomposedMesh::from_parts(
            *m.geometry(),
            m.vertices().to_vec(),
            tris,
            m.boundary_edges().to_vec(),
        )
        .unwrap();
        let report = validate_mesh(&bad);
        assert!(report
            .iter()
            .any(|v| matches!(v, Violation::NonPositiveArea { triangle: 3, .. })));
    }

    #[test]
    fn matrix_side_perturbation_is_nonconforming() {
        let m = build_decomposed_mesh(unit_layers(), 3, 2, 2).unwrap();
        // Duplicate an interior interface vertex and move the copy used by the
        // matrix triangles slightly off the interface.
        let interface_vertex = m
            .edges_with_tag(BoundaryTag::GammaI)
            .map(|e| e.vertices[1])
            .next()
            .unwrap();
        let mut vertices = m.vertices().to_vec();
        let p = vertices[interface_vertex];
        vertices.push([p[0] + 1e-3, p[1] - 1e-3]);
        let copy = vertices.len() - 1;
        let mut tris = m.triangles().to_vec();
        for t in tris.iter_mut().filter(|t| t.region == Region::Matrix) {
            for v in t.vertices.iter_mut() {
                if *v == interface_vertex {
                    *v = copy;
                }
            }
        }
        let bad = DecomposedMesh::from_parts(*m.geometry(), vertices, tris, m.boundary_edges().to_vec())
            .unwrap();
        let report = validate_mesh(&bad);
        assert!(
            report.iter().any(|v| matches!(v, Violation::NonConformingInterface { .. })),
            "{report:?}"
        );
    }

    #[test]
    fn text_format_roundtrip() {
        let m = build_decomposed_mesh(GeometrySpec::new(2.0, 0.3, 0.7).unwrap(), 3, 2, 2).unwrap();
        let text = mesh_to_string(&m);
        assert!(text.starts_with("nsdb-mesh v1\n"));
        let back = parse_mesh(&text).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.triangles(), m.triangles());
        assert!(validate_mesh(&back).is_empty());
        assert_eq!(mesh_to_string(&back), text);
    }

    #[test]
    fn locate_prefers_requested_region() {
        let m = build_decomposed_mesh(unit_layers(), 2, 2, 2).unwrap();
        let (t, _) = m.locate([0.3, 1.0], Some(Region::Free)).unwrap();
        assert_eq!(m.triangles()[t].region, Region::Free);
        let (t, _) = m.locate([0.3, 1.0], Some(Region::Matrix)).unwrap();
        assert_eq!(m.triangles()[t].region, Region::Matrix);
        assert!(m.locate([1.5, 0.5], None).is_none());
    }
}
