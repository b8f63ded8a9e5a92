//! Files written by a run: `energy.csv`, `state_<step>.json`, `mesh.txt` and
//! `report.json`. Nothing time-dependent is written, so reruns are
//! byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::assembly::{p1_at, CellQuad};
use crate::error::Result;
use crate::experiments::Setup;
use crate::fem::{DofMap, Field, NodalSpace};
use crate::mesh::{mesh_to_string, DecomposedMesh};
use crate::state::State;
use crate::stepper::{StepDiagnostics, Trajectory};

pub const ENERGY_HEADER: &str = "step,t,E_sigma,kinetic_f,kinetic_m,thermal,D_viscous,D_darcy,D_bjsj,D_brinkman,D_thermal,R,slack,picard_iters,linear_residual";

pub const MESH_FILE: &str = "mesh.txt";

/// 17 significant digits.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "nan".into()
    }
}

pub fn energy_csv(diagnostics: &[StepDiagnostics]) -> String {
    let mut s = String::from(ENERGY_HEADER);
    s.push('\n');
    for d in diagnostics {
        let e = &d.energy;
        let vals = [
            d.t,
            e.e_sigma,
            e.kinetic_f,
            e.kinetic_m,
            e.thermal,
            e.d_viscous,
            e.d_darcy,
            e.d_bjsj,
            e.d_brinkman,
            e.d_thermal,
            e.production,
            e.slack.unwrap_or(f64::NAN),
        ];
        let _ = write!(s, "{}", d.step);
        for v in vals {
            let _ = write!(s, ",{}", fmt17(v));
        }
        let _ = writeln!(s, ",{},{}", d.picard_iters, fmt17(d.linear_residual));
    }
    s
}

pub fn write_energy_csv(dir: &Path, diagnostics: &[StepDiagnostics]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("energy.csv"), energy_csv(diagnostics))?;
    Ok(())
}

fn zero_mean(mesh: &DecomposedMesh, space: &NodalSpace, p: &[f64]) -> Vec<f64> {
    let (mut int, mut area) = (0.0, 0.0);
    for (cell, &tri) in space.cells().iter().enumerate() {
        let cq = CellQuad::new(mesh, tri);
        for q in 0..cq.len() {
            int += cq.w[q] * p1_at(space, p, cell, &cq, q);
            area += cq.w[q];
        }
    }
    let mean = if area > 0.0 { int / area } else { 0.0 };
    p.iter().map(|v| v - mean).collect()
}

#[derive(Serialize)]
struct Snapshot<'a> {
    step: usize,
    t: f64,
    mesh: &'a str,
    fields: std::collections::BTreeMap<&'static str, Vec<f64>>,
}

/// Snapshot JSON; pressures are shifted to zero mean per region.
pub fn snapshot_json(step: usize, state: &State, mesh: &DecomposedMesh, dofs: &DofMap) -> String {
    let mut fields = std::collections::BTreeMap::new();
    for f in Field::ALL {
        let v = match f {
            Field::PressureFree => zero_mean(mesh, &dofs.pressure_free, &state.p_f),
            Field::PressureMatrix => zero_mean(mesh, &dofs.pressure_matrix, &state.p_m),
            _ => state.field(f).to_vec(),
        };
        fields.insert(f.name(), v);
    }
    let snap = Snapshot { step, t: state.t, mesh: MESH_FILE, fields };
    serde_json::to_string(&snap).expect("snapshot serializes")
}

/// Steps whose state is written for a given stride (0 disables).
pub fn snapshot_steps(num_steps: usize, stride: usize) -> Vec<usize> {
    if stride == 0 {
        return Vec::new();
    }
    (0..=num_steps).step_by(stride).collect()
}

pub fn write_outputs(dir: &Path, traj: &Trajectory, setup: &Setup, stride: usize) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let (mesh, dofs) = (&setup.problem.mesh, &setup.problem.dofs);
    std::fs::write(dir.join(MESH_FILE), mesh_to_string(mesh))?;
    write_energy_csv(dir, &traj.diagnostics)?;
    for k in snapshot_steps(traj.num_steps(), stride) {
        std::fs::write(dir.join(format!("state_{k}.json")), snapshot_json(k, &traj.states[k], mesh, dofs))?;
    }
    Ok(())
}

pub fn write_report(dir: &Path, report: &Value) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(dir.join("report.json"), text)?;
    Ok(())
}
