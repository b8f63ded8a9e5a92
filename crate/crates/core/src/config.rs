//! Run configuration (JSON) and scenario presets.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fem::BoundaryMode;
use crate::mesh::{GeometrySpec, Point};
use crate::model::MaterialSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub material: MaterialSpec,
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub lx: f64,
    pub hf: f64,
    pub hm: f64,
    pub nx: usize,
    pub ny_f: usize,
    pub ny_m: usize,
}

impl GeometryConfig {
    pub fn spec(&self) -> Result<GeometrySpec> {
        GeometrySpec::new(self.lx, self.hm, self.hf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoKeyword {
    Auto,
}

/// `sigma`: a positive number or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    Value(f64),
    Auto(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryModeConfig {
    #[default]
    Coupled,
    Clamped,
}

impl From<BoundaryModeConfig> for BoundaryMode {
    fn from(m: BoundaryModeConfig) -> Self {
        match m {
            BoundaryModeConfig::Coupled => BoundaryMode::Coupled,
            BoundaryModeConfig::Clamped => BoundaryMode::Clamped,
        }
    }
}

/// Built-in source sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceSet {
    /// Manufactured solution of the clamped per-subdomain problem.
    Manufactured,
}

fn d_picard_tol() -> f64 {
    1e-10
}
fn d_picard_max() -> usize {
    50
}
fn d_linear_tol() -> f64 {
    1e-12
}
fn d_linear_max() -> usize {
    500
}
fn d_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub delta: f64,
    pub xi: f64,
    pub final_time: f64,
    pub sigma: SigmaSpec,
    #[serde(default = "d_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "d_picard_max")]
    pub picard_max: usize,
    #[serde(default = "d_linear_tol")]
    pub linear_tol: f64,
    #[serde(default = "d_linear_max")]
    pub linear_max: usize,
    /// `false` holds the velocity at zero (pure heat conduction).
    #[serde(default = "d_true")]
    pub buoyancy: bool,
    #[serde(default)]
    pub boundary_mode: BoundaryModeConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sources: Option<SourceSet>,
}

/// Scalar initial-data expressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarExpr {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `c + cx x + cy y`.
    Affine {
        c: f64,
        cx: f64,
        cy: f64,
    },
    /// `amplitude sin(kx pi x / lx) sin(ky pi y / h)` with `h` the total height.
    SineProduct {
        amplitude: f64,
        kx: f64,
        ky: f64,
    },
    /// Smooth compactly supported bump of the given radius.
    Bump {
        amplitude: f64,
        center: Point,
        radius: f64,
    },
    /// First discrete Dirichlet eigenmode of the temperature space, unit
    /// `L2` norm, times `amplitude`. Temperature only.
    Eigenmode {
        amplitude: f64,
    },
}

impl ScalarExpr {
    /// Pointwise value; `None` for the eigenmode, which is not pointwise.
    pub fn eval(&self, p: Point, lx: f64, height: f64) -> Option<f64> {
        use std::f64::consts::PI;
        Some(match *self {
            ScalarExpr::Zero => 0.0,
            ScalarExpr::Constant { value } => value,
            ScalarExpr::Affine { c, cx, cy } => c + cx * p[0] + cy * p[1],
            ScalarExpr::SineProduct { amplitude, kx, ky } => {
                amplitude * (kx * PI * p[0] / lx).sin() * (ky * PI * p[1] / height).sin()
            }
            ScalarExpr::Bump { amplitude, center, radius } => amplitude * bump(p, center, radius),
            ScalarExpr::Eigenmode { .. } => return None,
        })
    }
}

/// `exp(1 - 1 / (1 - r^2 / R^2))` inside the disc, 0 outside.
pub fn bump(p: Point, center: Point, radius: f64) -> f64 {
    let r2 = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)) / (radius * radius);
    if r2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r2)).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct VectorExpr {
    #[serde(default)]
    pub x: ScalarExpr,
    #[serde(default)]
    pub y: ScalarExpr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub u_f: VectorExpr,
    #[serde(default)]
    pub u_m: VectorExpr,
    #[serde(default)]
    pub theta: ScalarExpr,
}

fn d_levels3() -> usize {
    3
}
fn d_levels4() -> usize {
    4
}
fn d_amplitudes() -> Vec<f64> {
    vec![1e-6, 1e-5, 1e-4]
}
fn d_bump() -> BumpConfig {
    BumpConfig { center: [0.5, 0.5], radius: 0.25 }
}
fn d_tolerance_pair() -> [f64; 2] {
    [1e-8, 1e-12]
}
fn d_compare_time() -> f64 {
    1.0
}
fn d_mms_levels() -> Vec<usize> {
    vec![4, 8, 16]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub center: Point,
    pub radius: f64,
}

/// Which experiment the configuration drives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentConfig {
    #[default]
    Run,
    XiSweep {
        #[serde(default = "d_levels3")]
        levels: usize,
    },
    DtRefine {
        #[serde(default = "d_levels4")]
        levels: usize,
    },
    Uniqueness {
        #[serde(default = "d_amplitudes")]
        amplitudes: Vec<f64>,
        #[serde(default = "d_bump")]
        bump: BumpConfig,
        /// Picard tolerances of the solver-tolerance twin runs.
        #[serde(default = "d_tolerance_pair")]
        tolerance_pair: [f64; 2],
        #[serde(default = "d_compare_time")]
        compare_time: f64,
    },
    Mms {
        /// `nx` of each level; layer resolutions follow the geometry ratios.
        #[serde(default = "d_mms_levels")]
        levels: Vec<usize>,
    },
}

impl ExperimentConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentConfig::Run => "run",
            ExperimentConfig::XiSweep { .. } => "xi_sweep",
            ExperimentConfig::DtRefine { .. } => "dt_refine",
            ExperimentConfig::Uniqueness { .. } => "uniqueness",
            ExperimentConfig::Mms { .. } => "mms",
        }
    }
}

fn d_dir() -> String {
    "out".into()
}
fn d_stride() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "d_dir")]
    pub directory: String,
    /// Snapshot every `stride` steps; 0 disables snapshots.
    #[serde(default = "d_stride")]
    pub snapshot_stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: d_dir(), snapshot_stride: d_stride() }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    /// Hex SHA-256 of the compact serialization.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("configuration serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Structural checks that do not need a mesh.
    pub fn check(&self) -> Result<()> {
        let g = &self.geometry;
        if g.nx == 0 || g.ny_f == 0 || g.ny_m == 0 {
            return Err(Error::Config("mesh resolutions must be positive".into()));
        }
        g.spec().map_err(|e| Error::Config(e.to_string()))?;
        if let SigmaSpec::Value(s) = self.scheme.sigma {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::Config(format!("sigma must be positive, got {s}")));
            }
        }
        for e in [&self.initial.u_f.x, &self.initial.u_f.y, &self.initial.u_m.x, &self.initial.u_m.y] {
            if matches!(e, ScalarExpr::Eigenmode { .. }) {
                return Err(Error::Config("eigenmode initial data is only available for theta".into()));
            }
        }
        match &self.experiment {
            ExperimentConfig::XiSweep { levels } | ExperimentConfig::DtRefine { levels } if *levels < 3 => {
                return Err(Error::Config(format!("at least 3 levels are required, got {levels}")));
            }
            ExperimentConfig::Uniqueness { amplitudes, bump, .. } => {
                if amplitudes.iter().any(|a| !(*a >= 0.0)) {
                    return Err(Error::Config("perturbation amplitudes must be nonnegative".into()));
                }
                if !(bump.radius > 0.0) {
                    return Err(Error::Config("bump radius must be positive".into()));
                }
            }
            ExperimentConfig::Mms { levels } => {
                if levels.len() < 3 || levels.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config("mms needs at least 3 increasing levels".into()));
                }
                if self.scheme.boundary_mode != BoundaryModeConfig::Clamped {
                    return Err(Error::Config("mms requires boundary_mode = \"clamped\"".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// The buoyant cavity: unit-width layers of height 1/2, hot bottom,
/// fluid at rest.
pub fn buoyant_cavity(varpi: f64, nx: usize) -> RunConfig {
    RunConfig {
        geometry: GeometryConfig { lx: 1.0, hf: 0.5, hm: 0.5, nx, ny_f: nx / 2, ny_m: nx / 2 },
        material: MaterialSpec::constant(1.0, 1.0, 1e-2, 1.0, varpi),
        scheme: SchemeConfig {
            delta: 1e-2,
            xi: 1e-3,
            final_time: 2.0,
            sigma: SigmaSpec::Auto(AutoKeyword::Auto),
            picard_tol: d_picard_tol(),
            picard_max: d_picard_max(),
            linear_tol: d_linear_tol(),
            linear_max: d_linear_max(),
            buoyancy: true,
            boundary_mode: BoundaryModeConfig::Coupled,
            sources: None,
        },
        initial: InitialConfig {
            theta: ScalarExpr::Affine { c: 1.0, cx: 0.0, cy: -1.0 },
            ..Default::default()
        },
        experiment: ExperimentConfig::Run,
        output: OutputConfig::default(),
    }
}

/// Pure conduction of the first discrete eigenmode.
pub fn diffusion_eigenmode(nx: usize) -> RunConfig {
    let mut cfg = buoyant_cavity(1.0, nx);
    cfg.scheme.buoyancy = false;
    cfg.scheme.final_time = 0.1;
    cfg.scheme.sigma = SigmaSpec::Value(1.0);
    cfg.initial = InitialConfig { theta: ScalarExpr::Eigenmode { amplitude: 1.0 }, ..Default::default() };
    cfg
}

/// Everything zero.
pub fn zero_data(nx: usize) -> RunConfig {
    let mut cfg = buoyant_cavity(1.0, nx);
    cfg.initial = InitialConfig::default();
    cfg.scheme.sigma = SigmaSpec::Value(1.0);
    cfg
}

/// Clamped per-subdomain manufactured-solution setup.
pub fn manufactured(levels: Vec<usize>) -> RunConfig {
    let mut cfg = buoyant_cavity(1.0, levels[0]);
    cfg.material = MaterialSpec::constant(1.0, 1.0, 1.0, 1.0, 1.0);
    cfg.scheme.boundary_mode = BoundaryModeConfig::Clamped;
    cfg.scheme.sources = Some(SourceSet::Manufactured);
    cfg.scheme.final_time = 0.1;
    cfg.scheme.xi = 0.1;
    cfg.scheme.sigma = SigmaSpec::Value(1.0);
    cfg.initial = InitialConfig::default();
    cfg.experiment = ExperimentConfig::Mms { levels };
    cfg
}

/// Named presets for the command line and the Python bindings.
pub fn preset(name: &str) -> Option<RunConfig> {
    Some(match name {
        "buoyant_cavity" => buoyant_cavity(1.0, 32),
        "buoyant_cavity_quasistatic" => buoyant_cavity(0.0, 32),
        "diffusion_eigenmode" => diffusion_eigenmode(8),
        "zero" => zero_data(8),
        "manufactured" => manufactured(d_mms_levels()),
        _ => return None,
    })
}
