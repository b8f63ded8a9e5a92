//! Time stepping: Picard iteration over the velocity and temperature blocks
//! of one step, and the trajectory loop.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::assembly::{apply_boundary_conditions, assemble_momentum, assemble_projection, assemble_temperature, weak_residual};
use crate::diagnostics::{energy_report, EnergyReport};
use crate::error::{Error, Result};
use crate::fem::{DofMap, Field};
use crate::linalg::{norm2, ReusedLuSolver, SparseSystem};
use crate::mesh::DecomposedMesh;
use crate::model::{MaterialModel, SchemeParams};
use crate::state::State;

/// Per-step solver and energy record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub delta: f64,
    pub picard_iters: usize,
    pub update_norm: f64,
    pub update_history: Vec<f64>,
    /// Krylov iterations of every linear solve of the step, in order.
    pub linear_iters: Vec<usize>,
    /// Largest relative residual among the step's linear solves.
    pub linear_residual: f64,
    pub residual_momentum: f64,
    pub residual_temperature: f64,
    pub energy: EnergyReport,
}

/// Everything a step needs besides the current state.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: DecomposedMesh,
    pub dofs: DofMap,
    pub material: MaterialModel,
    pub params: SchemeParams,
}

/// Holds the reusable factorizations across steps.
#[derive(Debug)]
pub struct Stepper {
    flow: ReusedLuSolver,
    heat: ReusedLuSolver,
    dump_dir: Option<PathBuf>,
    step: usize,
}

impl Stepper {
    pub fn new(params: &SchemeParams) -> Self {
        Stepper {
            flow: ReusedLuSolver::new(params.linear_tol, params.linear_max),
            heat: ReusedLuSolver::new(params.linear_tol, params.linear_max),
            dump_dir: None,
            step: 0,
        }
    }

    /// Write every assembled (reduced) system in matrix-market form.
    pub fn with_dump_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.dump_dir = Some(dir.into());
        self
    }

    fn dump(&self, sys: &SparseSystem, what: &str, iter: usize) -> Result<()> {
        if let Some(dir) = &self.dump_dir {
            std::fs::create_dir_all(dir)?;
            sys.write_matrix_market(&dir.join(format!("{what}_step{}_iter{iter}.mtx", self.step)))?;
        }
        Ok(())
    }

    /// One step of size `params.delta` from `state_k`.
    pub fn advance(
        &mut self,
        state_k: &State,
        params: &SchemeParams,
        material: &MaterialModel,
        mesh: &DecomposedMesh,
        dofs: &DofMap,
    ) -> Result<(State, StepDiagnostics)> {
        state_k.validate_sizes(dofs)?;
        self.step += 1;
        let scale = 1.0 + (norm2(&state_k.u_f).powi(2) + norm2(&state_k.u_m).powi(2)).sqrt() + norm2(&state_k.theta);
        let mut cur = state_k.clone();
        cur.t = state_k.t + params.delta;
        let mut history = Vec::new();
        let mut linear_iters = Vec::new();
        let mut linear_residual = 0.0_f64;
        let mut converged = false;
        for iter in 0..params.picard_max {
            let mut next = cur.clone();
            if params.buoyancy {
                let sys = apply_boundary_conditions(
                    &assemble_momentum(state_k, &cur.theta, &cur.u_f, params, material, mesh, dofs)?,
                    mesh,
                    dofs,
                )?;
                self.dump(&sys, "momentum", iter)?;
                let x0 = sys.restrict(&cur.gather(&Field::FLOW));
                let (x, rep) = self.flow.solve(&sys.matrix, &sys.rhs, Some(&x0))?;
                linear_iters.push(rep.iterations);
                linear_residual = linear_residual.max(rep.residual);
                next.scatter(&Field::FLOW, &sys.expand(&x));
            } else {
                for f in Field::FLOW {
                    next.field_mut(f).iter_mut().for_each(|v| *v = 0.0);
                }
            }
            let sys = apply_boundary_conditions(
                &assemble_temperature(state_k, &next.u_f, &next.u_m, params, material, mesh, dofs)?,
                mesh,
                dofs,
            )?;
            self.dump(&sys, "temperature", iter)?;
            let x0 = sys.restrict(&cur.theta);
            let (x, rep) = self.heat.solve(&sys.matrix, &sys.rhs, Some(&x0))?;
            linear_iters.push(rep.iterations);
            linear_residual = linear_residual.max(rep.residual);
            next.theta = sys.expand(&x);

            let du = diff_norm(&[&next.u_f, &next.u_m], &[&cur.u_f, &cur.u_m]);
            let dt = diff_norm(&[&next.theta], &[&cur.theta]);
            let update = du + dt;
            history.push(update);
            cur = next;
            if !update.is_finite() {
                break;
            }
            if update <= params.picard_tol * scale {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::StepDivergence { history });
        }
        let (rm, rt) = weak_residual(state_k, &cur, params, material, mesh, dofs)?;
        let energy = energy_report(state_k, &cur, params, material, mesh, dofs);
        let diag = StepDiagnostics {
            step: self.step,
            t: cur.t,
            delta: params.delta,
            picard_iters: history.len(),
            update_norm: *history.last().unwrap_or(&0.0),
            update_history: history,
            linear_iters,
            linear_residual,
            residual_momentum: rm,
            residual_temperature: rt,
            energy,
        };
        Ok((cur, diag))
    }
}

fn diff_norm(a: &[&Vec<f64>], b: &[&Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        for (p, q) in x.iter().zip(y.iter()) {
            s += (p - q) * (p - q);
        }
    }
    s.sqrt()
}

/// One step with fresh solvers.
pub fn picard_advance(
    state_k: &State,
    params: &SchemeParams,
    material: &MaterialModel,
    mesh: &DecomposedMesh,
    dofs: &DofMap,
) -> Result<(State, StepDiagnostics)> {
    Stepper::new(params).advance(state_k, params, material, mesh, dofs)
}

/// `L2` projection of `(u_f, u_m)` onto discretely divergence-free fields
/// with matching normal traces. Returns the projected pair.
pub fn project_velocity(u_f: &[f64], u_m: &[f64], mesh: &DecomposedMesh, dofs: &DofMap) -> Result<(Vec<f64>, Vec<f64>)> {
    let sys = apply_boundary_conditions(&assemble_projection(mesh, dofs, u_f, u_m)?, mesh, dofs)?;
    let (x, _) = ReusedLuSolver::new(1e-13, 500).solve(&sys.matrix, &sys.rhs, None)?;
    let full = sys.expand(&x);
    let nf = dofs.field_len(Field::VelocityFree);
    let r = sys.layout.full_offset(Field::VelocityMatrix).expect("flow layout has u_m");
    Ok((full[..nf].to_vec(), full[r].to_vec()))
}

/// Initial state from interpolated data: constrained entries are zeroed
/// and the velocity is projected. For `varpi = 0` the matrix velocity
/// starts at zero.
pub fn initial_state(mut state: State, problem: &Problem) -> Result<State> {
    let dofs = &problem.dofs;
    for f in Field::ALL {
        let v = state.field_mut(f);
        for &(c, _) in &dofs.field(f).constrained {
            v[c] = 0.0;
        }
    }
    let (u_f, u_m) = project_velocity(&state.u_f, &state.u_m, &problem.mesh, dofs)?;
    state.u_f = u_f;
    state.u_m = if problem.params.varpi == 0.0 { vec![0.0; u_m.len()] } else { u_m };
    state.p_f.iter_mut().for_each(|v| *v = 0.0);
    state.p_m.iter_mut().for_each(|v| *v = 0.0);
    state.mu.iter_mut().for_each(|v| *v = 0.0);
    state.validate(dofs)?;
    Ok(state)
}

/// A computed trajectory. `states[0]` is the initial state and
/// `states[k]` follows `diagnostics[k - 1]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Set when the run stopped early.
    pub aborted: Option<String>,
    pub config_hash: Option<String>,
    pub wall_seconds: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &State {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn num_steps(&self) -> usize {
        self.diagnostics.len()
    }

    pub fn completed(&self) -> bool {
        self.aborted.is_none()
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub dump_dir: Option<PathBuf>,
    /// Log each accepted step to stderr.
    pub verbose: bool,
}

const MAX_HALVINGS: u32 = 3;

/// `N = ceil(T / delta)` steps from `initial` (already projected). A step
/// whose Picard iteration fails is redone as 2, 4 or 8 substeps before the
/// run is aborted; the partial trajectory is returned either way.
pub fn simulate(problem: &Problem, initial: State, opts: &RunOptions) -> Trajectory {
    let start = std::time::Instant::now();
    let Problem { mesh, dofs, material, params } = problem;
    let mut stepper = Stepper::new(params);
    if let Some(d) = &opts.dump_dir {
        stepper = stepper.with_dump_dir(d);
    }
    let t0 = initial.t;
    let mut states = vec![initial];
    let mut diagnostics = Vec::new();
    let mut aborted = None;
    let n = params.num_steps();
    'steps: for k in 0..n {
        let target = t0 + (k + 1) as f64 * params.delta;
        let from = states.last().unwrap().clone();
        match stepper.advance(&from, params, material, mesh, dofs) {
            Ok((mut s, d)) => {
                s.t = target;
                log_step(opts, &d);
                states.push(s);
                diagnostics.push(d);
            }
            Err(first) => {
                let mut last_err = first;
                for h in 1..=MAX_HALVINGS {
                    let m = 1usize << h;
                    let sub = SchemeParams { delta: params.delta / m as f64, ..params.clone() };
                    let mut local_states = Vec::new();
                    let mut local_diags = Vec::new();
                    let mut cur = from.clone();
                    let mut ok = true;
                    for _ in 0..m {
                        match stepper.advance(&cur, &sub, material, mesh, dofs) {
                            Ok((s, d)) => {
                                cur = s.clone();
                                local_states.push(s);
                                local_diags.push(d);
                            }
                            Err(e) => {
                                last_err = e;
                                ok = false;
                                break;
                            }
                        }
                    }
                    if ok {
                        if let Some(s) = local_states.last_mut() {
                            s.t = target;
                        }
                        for d in &local_diags {
                            log_step(opts, d);
                        }
                        states.extend(local_states);
                        diagnostics.extend(local_diags);
                        continue 'steps;
                    }
                }
                aborted = Some(
                    Error::RunAborted { time: from.t, reason: last_err.to_string() }.to_string(),
                );
                break;
            }
        }
    }
    for (i, d) in diagnostics.iter_mut().enumerate() {
        d.step = i + 1;
    }
    Trajectory { states, diagnostics, aborted, config_hash: None, wall_seconds: start.elapsed().as_secs_f64() }
}

fn log_step(opts: &RunOptions, d: &StepDiagnostics) {
    if opts.verbose {
        eprintln!(
            "t = {:.6}  E = {:.6e}  picard = {}  slack = {}",
            d.t,
            d.energy.e_sigma,
            d.picard_iters,
            d.energy.slack.map_or("n/a".to_string(), |s| format!("{s:.3e}"))
        );
    }
}
