//! Solver front-ends.

use super::direct::{DenseLu, SparseLu};
use super::gmres::{gmres, IdentityPreconditioner, Preconditioner};
use super::ilu::Ilu0;
use super::sparse::{norm2, CsrMatrix};
use super::system::SparseSystem;
use crate::{Error, Result};

pub const DENSE_LIMIT: usize = 2000;
const RESTART: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    DenseLu,
    GmresIlu0,
    Gmres,
    GmresLu,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub method: SolveMethod,
    pub iterations: usize,
    pub residual: f64,
}

pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let bn = norm2(b);
    let ax = a.mul_vec(x);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    if bn == 0.0 {
        r
    } else {
        r / bn
    }
}

/// Solves `system` to relative residual `tol`: dense LU with iterative
/// refinement up to [`DENSE_LIMIT`] unknowns, otherwise GMRES with ILU(0),
/// falling back to plain GMRES when the factorization breaks down.
pub fn solve_linear(system: &SparseSystem, tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveReport)> {
    solve_matrix(&system.matrix, &system.rhs, tol, max_iter)
}

pub fn solve_matrix(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveReport)> {
    let n = b.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::Parameter(format!("matrix {}x{} does not match rhs {n}", a.nrows(), a.ncols())));
    }
    if norm2(b) == 0.0 {
        return Ok((vec![0.0; n], SolveReport { method: SolveMethod::DenseLu, iterations: 0, residual: 0.0 }));
    }
    if n <= DENSE_LIMIT {
        let lu = DenseLu::new(a)?;
        let mut x = lu.solve(b)?;
        let mut res = relative_residual(a, &x, b);
        let mut it = 0;
        while res > tol && it < 5 {
            let ax = a.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
            let dx = lu.solve(&r)?;
            for (xi, d) in x.iter_mut().zip(&dx) {
                *xi += d;
            }
            let next = relative_residual(a, &x, b);
            it += 1;
            if !(next < res) {
                res = next;
                break;
            }
            res = next;
        }
        if res > tol {
            return Err(Error::Solver { residual: res, iterations: it });
        }
        return Ok((x, SolveReport { method: SolveMethod::DenseLu, iterations: it, residual: res }));
    }
    let (prec, method): (Box<dyn Preconditioner>, SolveMethod) = match Ilu0::new(a) {
        Ok(ilu) => (Box::new(ilu), SolveMethod::GmresIlu0),
        Err(_) => (Box::new(IdentityPreconditioner), SolveMethod::Gmres),
    };
    let mut out = gmres(a, b, None, prec.as_ref(), tol, RESTART, max_iter);
    let mut method = method;
    if !out.converged && method == SolveMethod::GmresIlu0 && !out.residual.is_finite() {
        out = gmres(a, b, None, &IdentityPreconditioner, tol, RESTART, max_iter);
        method = SolveMethod::Gmres;
    }
    if !out.converged {
        return Err(Error::Solver { residual: out.residual, iterations: out.iterations });
    }
    Ok((out.x, SolveReport { method, iterations: out.iterations, residual: out.residual }))
}

/// GMRES preconditioned by the sparse LU of an earlier matrix from a
/// sequence of nearby systems. The factorization is rebuilt whenever GMRES
/// needs more than `refactor_after` iterations or fails.
#[derive(Debug)]
pub struct ReusedLuSolver {
    lu: Option<SparseLu>,
    pub tol: f64,
    pub max_iter: usize,
    pub refactor_after: usize,
    pub factorizations: usize,
}

impl ReusedLuSolver {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        ReusedLuSolver { lu: None, tol, max_iter, refactor_after: 30, factorizations: 0 }
    }

    pub fn invalidate(&mut self) {
        self.lu = None;
    }

    pub fn solve(&mut self, a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>) -> Result<(Vec<f64>, SolveReport)> {
        let n = b.len();
        if norm2(b) == 0.0 {
            return Ok((vec![0.0; n], SolveReport { method: SolveMethod::GmresLu, iterations: 0, residual: 0.0 }));
        }
        if let Some(lu) = self.lu.as_ref().filter(|lu| lu.dim() == n) {
            let cap = self.refactor_after.min(self.max_iter);
            let out = gmres(a, b, x0, lu, self.tol, cap, cap);
            if out.converged {
                return Ok((
                    out.x,
                    SolveReport { method: SolveMethod::GmresLu, iterations: out.iterations, residual: out.residual },
                ));
            }
        }
        let lu = SparseLu::new(a)?;
        self.factorizations += 1;
        let out = gmres(a, b, x0, &lu, self.tol, RESTART, self.max_iter);
        self.lu = Some(lu);
        if !out.converged {
            return Err(Error::Solver { residual: out.residual, iterations: out.iterations });
        }
        Ok((out.x, SolveReport { method: SolveMethod::GmresLu, iterations: out.iterations, residual: out.residual }))
    }
}
