//! Physical coefficients, scheme parameters and the energy-weight calibration.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assembly::scalar_mass_stiffness;
use crate::error::{param_err, Assumption, Error, Result};
use crate::fem::{edge_rule, tables, AffineMap, DofMap, Field};
use crate::linalg::{norm2, SparseLu};
use crate::mesh::{DecomposedMesh, Point, Region};

/// Scalar coefficient families whose bounds can be checked by sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientExpr {
    Constant {
        value: f64,
    },
    /// `clamp(offset + slope * s, min, max)`; a missing limit is unbounded.
    AffineClamped {
        offset: f64,
        slope: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<f64>,
    },
    /// `base + amplitude * tanh(rate * (s - center))`.
    Tanh {
        base: f64,
        amplitude: f64,
        #[serde(default = "unit")]
        rate: f64,
        #[serde(default)]
        center: f64,
    },
}

fn unit() -> f64 {
    1.0
}

impl CoefficientExpr {
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            CoefficientExpr::Constant { value } => value,
            CoefficientExpr::AffineClamped { offset, slope, min, max } => {
                let mut v = offset + slope * s;
                if let Some(lo) = min {
                    v = v.max(lo);
                }
                if let Some(hi) = max {
                    v = v.min(hi);
                }
                v
            }
            CoefficientExpr::Tanh { base, amplitude, rate, center } => base + amplitude * (rate * (s - center)).tanh(),
        }
    }

    /// Derivative (one-sided at clamp kinks, where the clamped side is taken).
    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            CoefficientExpr::Constant { .. } => 0.0,
            CoefficientExpr::AffineClamped { offset, slope, min, max } => {
                let raw = offset + slope * s;
                if min.is_some_and(|lo| raw <= lo) || max.is_some_and(|hi| raw >= hi) {
                    0.0
                } else {
                    slope
                }
            }
            CoefficientExpr::Tanh { amplitude, rate, center, .. } => {
                let t = (rate * (s - center)).tanh();
                amplitude * rate * (1.0 - t * t)
            }
        }
    }
}

/// Declared bounds `lower <= f <= upper`, `|f'| <= lipschitz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    pub expr: CoefficientExpr,
    pub bounds: Bounds,
}

impl CoefficientSpec {
    pub fn constant(value: f64) -> Self {
        CoefficientSpec {
            expr: CoefficientExpr::Constant { value },
            bounds: Bounds { lower: value, upper: value, lipschitz: Some(0.0) },
        }
    }
}

/// Material block of a run configuration. `kappa` is a function of the
/// height `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub nu: CoefficientSpec,
    pub lambda_f: CoefficientSpec,
    pub lambda_m: CoefficientSpec,
    pub kappa: CoefficientSpec,
    pub alpha: f64,
    pub varpi: f64,
}

impl MaterialSpec {
    pub fn constant(nu: f64, lambda: f64, kappa: f64, alpha: f64, varpi: f64) -> Self {
        MaterialSpec {
            nu: CoefficientSpec::constant(nu),
            lambda_f: CoefficientSpec::constant(lambda),
            lambda_m: CoefficientSpec::constant(lambda),
            kappa: CoefficientSpec::constant(kappa),
            alpha,
            varpi,
        }
    }
}

/// Validated coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialModel {
    spec: MaterialSpec,
}

pub const SAMPLE_RANGE: (f64, f64) = (-10.0, 10.0);
pub const SAMPLE_COUNT: usize = 1000;

fn check_coefficient(name: &str, c: &CoefficientSpec, assumption: Assumption) -> Result<()> {
    let b = c.bounds;
    let violation = |detail: String| Err(Error::BoundViolation { assumption, detail });
    if !(b.lower > 0.0) || !(b.upper >= b.lower) {
        return violation(format!("{name}: declared bounds [{}, {}] must satisfy 0 < lower <= upper", b.lower, b.upper));
    }
    let (a, z) = SAMPLE_RANGE;
    for k in 0..SAMPLE_COUNT {
        let s = a + (z - a) * k as f64 / (SAMPLE_COUNT - 1) as f64;
        let v = c.expr.value(s);
        if !(v >= b.lower && v <= b.upper) {
            return violation(format!("{name}({s}) = {v} outside [{}, {}]", b.lower, b.upper));
        }
        if let Some(l) = b.lipschitz {
            let d = c.expr.derivative(s).abs();
            if !(d <= l) {
                return violation(format!("|{name}'({s})| = {d} exceeds {l}"));
            }
        }
    }
    Ok(())
}

/// Points where the permeability is evaluated: quadrature points of matrix
/// triangles and of interface edges.
fn kappa_sample_points(mesh: &DecomposedMesh) -> Vec<Point> {
    let t = tables();
    let mut pts = Vec::new();
    for tri in mesh.triangles_in(Region::Matrix) {
        let map = AffineMap::new(&mesh.triangle_coords(tri));
        pts.extend(t.rule.points.iter().map(|&xi| map.map(xi)));
    }
    let er = edge_rule();
    for be in mesh.edges_with_tag(crate::mesh::BoundaryTag::GammaI) {
        let [a, b] = be.vertices;
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        pts.extend(er.points.iter().map(|&s| [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]));
    }
    pts
}

/// Checks (A1) on `nu`, (A2) on `lambda_f`/`lambda_m` by sampling
/// `s in [-10, 10]`, and (A3) on `kappa` at every quadrature point of the
/// matrix region.
pub fn make_material(spec: &MaterialSpec, mesh: &DecomposedMesh) -> Result<MaterialModel> {
    check_coefficient("nu", &spec.nu, Assumption::A1)?;
    check_coefficient("lambda_f", &spec.lambda_f, Assumption::A2)?;
    check_coefficient("lambda_m", &spec.lambda_m, Assumption::A2)?;
    let kb = spec.kappa.bounds;
    if !(kb.lower > 0.0) || !(kb.upper >= kb.lower) {
        return Err(Error::BoundViolation {
            assumption: Assumption::A3,
            detail: format!("kappa: declared bounds [{}, {}] must satisfy 0 < lower <= upper", kb.lower, kb.upper),
        });
    }
    for p in kappa_sample_points(mesh) {
        let v = spec.kappa.expr.value(p[1]);
        if !(v >= kb.lower && v <= kb.upper) {
            return Err(Error::BoundViolation {
                assumption: Assumption::A3,
                detail: format!("kappa at ({}, {}) = {v} outside [{}, {}]", p[0], p[1], kb.lower, kb.upper),
            });
        }
    }
    if !(spec.alpha > 0.0) || !spec.alpha.is_finite() {
        return param_err(format!("alpha must be positive, got {}", spec.alpha));
    }
    if !(spec.varpi >= 0.0) || !spec.varpi.is_finite() {
        return param_err(format!("varpi must be nonnegative, got {}", spec.varpi));
    }
    Ok(MaterialModel { spec: spec.clone() })
}

impl MaterialModel {
    pub fn spec(&self) -> &MaterialSpec {
        &self.spec
    }

    pub fn nu(&self, theta: f64) -> f64 {
        self.spec.nu.expr.value(theta)
    }

    pub fn lambda(&self, region: Region, theta: f64) -> f64 {
        match region {
            Region::Free => self.spec.lambda_f.expr.value(theta),
            Region::Matrix => self.spec.lambda_m.expr.value(theta),
        }
    }

    pub fn kappa(&self, p: Point) -> f64 {
        self.spec.kappa.expr.value(p[1])
    }

    /// BJSJ friction coefficient `alpha nu / sqrt(trace K)` with
    /// `trace K = 2 kappa`.
    pub fn bjsj(&self, theta: f64, p: Point) -> f64 {
        self.spec.alpha * self.nu(theta) / (2.0 * self.kappa(p)).sqrt()
    }

    pub fn alpha(&self) -> f64 {
        self.spec.alpha
    }

    pub fn varpi(&self) -> f64 {
        self.spec.varpi
    }

    pub fn nu_lower(&self) -> f64 {
        self.spec.nu.bounds.lower
    }

    pub fn kappa_upper(&self) -> f64 {
        self.spec.kappa.bounds.upper
    }

    /// Smaller of the two diffusivity lower bounds.
    pub fn lambda_lower(&self) -> f64 {
        self.spec.lambda_f.bounds.lower.min(self.spec.lambda_m.bounds.lower)
    }

    pub fn with_varpi(&self, varpi: f64) -> Result<Self> {
        if !(varpi >= 0.0) {
            return param_err(format!("varpi must be nonnegative, got {varpi}"));
        }
        let mut spec = self.spec.clone();
        spec.varpi = varpi;
        Ok(MaterialModel { spec })
    }
}

/// Body forces and heat source for manufactured-solution runs, evaluated at
/// the new time level.
pub trait Forcing: Send + Sync + fmt::Debug {
    fn momentum_free(&self, _p: Point, _t: f64) -> [f64; 2] {
        [0.0; 2]
    }

    fn momentum_matrix(&self, _p: Point, _t: f64) -> [f64; 2] {
        [0.0; 2]
    }

    fn heat(&self, _p: Point, _t: f64) -> f64 {
        0.0
    }

    /// Extra load added coefficient-wise to the temperature right-hand side.
    fn heat_load(&self, _t: f64) -> Option<Vec<f64>> {
        None
    }
}

#[derive(Debug, Clone)]
pub struct SchemeParams {
    pub delta: f64,
    pub xi: f64,
    pub sigma: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub linear_tol: f64,
    pub linear_max: usize,
    pub final_time: f64,
    pub varpi: f64,
    /// When false the velocity is held at zero and only the heat equation is
    /// advanced.
    pub buoyancy: bool,
    pub sources: Option<Arc<dyn Forcing>>,
}

impl SchemeParams {
    pub fn new(delta: f64, xi: f64, sigma: f64, final_time: f64, varpi: f64) -> Self {
        SchemeParams {
            delta,
            xi,
            sigma,
            picard_tol: 1e-10,
            picard_max: 50,
            linear_tol: 1e-12,
            linear_max: 500,
            final_time,
            varpi,
            buoyancy: true,
            sources: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let open = |x: f64| x > 0.0 && x < 1.0;
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return param_err(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.xi >= 0.0 && self.xi < 1.0) {
            return param_err(format!("xi must lie in [0, 1), got {}", self.xi));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return param_err(format!("sigma must be positive, got {}", self.sigma));
        }
        if !open(self.picard_tol) || !open(self.linear_tol) {
            return param_err("tolerances must lie in (0, 1)");
        }
        if self.picard_max < 1 || self.linear_max < 1 {
            return param_err("iteration limits must be at least 1");
        }
        if !(self.final_time > 0.0) || !self.final_time.is_finite() {
            return param_err(format!("final time must be positive, got {}", self.final_time));
        }
        if !(self.varpi >= 0.0) {
            return param_err(format!("varpi must be nonnegative, got {}", self.varpi));
        }
        Ok(())
    }

    pub fn has_sources(&self) -> bool {
        self.sources.is_some()
    }

    pub fn num_steps(&self) -> usize {
        ((self.final_time / self.delta) - 1e-9).ceil().max(1.0) as usize
    }
}

/// `eps = min{nu_, nu_/kappa^, alpha nu_/sqrt(kappa^)} / 4`.
pub fn epsilon_star(material: &MaterialModel) -> f64 {
    let nu = material.nu_lower();
    let k = material.kappa_upper();
    let a = material.alpha();
    0.25 * nu.min(nu / k).min(a * nu / k.sqrt())
}

/// `sigma = 4 C_P (C_Z^2 + 1) / (eps lambda_)`.
pub fn calibrate_sigma(material: &MaterialModel, c_p: f64, c_z: f64) -> f64 {
    4.0 * c_p * (c_z * c_z + 1.0) / (epsilon_star(material) * material.lambda_lower())
}

/// Poincare constant of the temperature space together with the discrete
/// first eigenmode (full coefficient vector, unit L2 norm).
#[derive(Debug, Clone)]
pub struct PoincareResult {
    pub constant: f64,
    pub eigenvalue: f64,
    pub mode: Vec<f64>,
    pub iterations: usize,
}

/// Smallest eigenvalue of the Dirichlet stiffness/mass pencil on the
/// temperature space by inverse power iteration.
pub fn poincare_constant(mesh: &DecomposedMesh, dofs: &DofMap) -> Result<PoincareResult> {
    let (mass, stiff) = scalar_mass_stiffness(mesh, dofs, Field::Temperature);
    let n = mass.nrows();
    if n == 0 {
        return param_err("temperature space has no free degrees of freedom");
    }
    let lu = SparseLu::new(&stiff)?;
    let mut x = vec![1.0; n];
    let m_norm = |x: &[f64]| mass.bilinear(x, x).sqrt();
    let s = m_norm(&x);
    x.iter_mut().for_each(|v| *v /= s);
    let mut lambda = stiff.bilinear(&x, &x);
    for it in 1..=10_000 {
        let y = lu.solve(&mass.mul_vec(&x));
        let s = m_norm(&y);
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Numerical("inverse iteration collapsed".into()));
        }
        x = y.into_iter().map(|v| v / s).collect();
        let next = stiff.bilinear(&x, &x);
        let done = (next - lambda).abs() <= 1e-8 * next.abs() * 1e-2;
        lambda = next;
        if done {
            let ax = stiff.mul_vec(&x);
            let mx = mass.mul_vec(&x);
            let res: Vec<f64> = ax.iter().zip(&mx).map(|(a, m)| a - lambda * m).collect();
            if norm2(&res) <= 1e-9 * norm2(&ax) {
                let mut mode = vec![0.0; dofs.field_len(Field::Temperature)];
                let fd = dofs.field(Field::Temperature);
                for (c, slot) in fd.free.iter().enumerate() {
                    if let Some(g) = slot {
                        mode[c] = x[g - fd.range.start];
                    }
                }
                return Ok(PoincareResult { constant: 1.0 / lambda, eigenvalue: lambda, mode, iterations: it });
            }
        }
    }
    Err(Error::Numerical("Poincare inverse iteration did not converge in 10000 steps".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_decomposed_mesh, GeometrySpec};

    fn mesh() -> DecomposedMesh {
        build_decomposed_mesh(GeometrySpec::new(1.0, 0.5, 0.5).unwrap(), 2, 1, 1).unwrap()
    }

    #[test]
    fn constant_material_is_valid() {
        let m = make_material(&MaterialSpec::constant(1.0, 1.0, 1.0, 1.0, 1.0), &mesh()).unwrap();
        assert_eq!(m.nu(3.0), 1.0);
        assert_eq!(epsilon_star(&m), 0.25);
    }

    #[test]
    fn tanh_viscosity_within_declared_bounds() {
        let mut spec = MaterialSpec::constant(1.0, 1.0, 1.0, 1.0, 1.0);
        spec.nu = CoefficientSpec {
            expr: CoefficientExpr::Tanh { base: 1.0, amplitude: 0.5, rate: 1.0, center: 0.0 },
            bounds: Bounds { lower: 0.5, upper: 1.5, lipschitz: Some(0.5) },
        };
        assert!(make_material(&spec, &mesh()).is_ok());
    }

    #[test]
    fn unbounded_viscosity_rejected() {
        let mut spec = MaterialSpec::constant(1.0, 1.0, 1.0, 1.0, 1.0);
        spec.nu = CoefficientSpec {
            expr: CoefficientExpr::AffineClamped { offset: 0.0, slope: 1.0, min: None, max: None },
            bounds: Bounds { lower: 0.1, upper: 100.0, lipschitz: Some(1.0) },
        };
        match make_material(&spec, &mesh()) {
            Err(Error::BoundViolation { assumption: Assumption::A1, .. }) => {}
            other => panic!("expected A1 violation, got {other:?}"),
        }
    }

    #[test]
    fn permeability_checked_at_quadrature_points() {
        let mut spec = MaterialSpec::constant(1.0, 1.0, 1.0, 1.0, 1.0);
        spec.kappa = CoefficientSpec {
            expr: CoefficientExpr::AffineClamped { offset: 0.1, slope: 1.0, min: None, max: None },
            bounds: Bounds { lower: 0.1, upper: 0.5, lipschitz: None },
        };
        match make_material(&spec, &mesh()) {
            Err(Error::BoundViolation { assumption: Assumption::A3, .. }) => {}
            other => panic!("expected A3 violation, got {other:?}"),
        }
    }

    #[test]
    fn epsilon_formula() {
        let spec = MaterialSpec::constant(2.0, 1.0, 4.0, 1.0, 1.0);
        let m = make_material(&spec, &mesh()).unwrap();
        assert_eq!(epsilon_star(&m), 0.125);
        let scaled = make_material(&MaterialSpec::constant(6.0, 1.0, 4.0, 1.0, 1.0), &mesh()).unwrap();
        assert!((epsilon_star(&scaled) - 3.0 * epsilon_star(&m)).abs() < 1e-15);
    }

    #[test]
    fn sigma_formula() {
        let m = make_material(&MaterialSpec::constant(1.0, 1.0, 1.0, 1.0, 1.0), &mesh()).unwrap();
        assert!((calibrate_sigma(&m, 0.0507, 1.0) - 1.6224).abs() < 1e-12);
    }
}
